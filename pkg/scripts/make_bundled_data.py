"""Regenerate the bundled synthetic event log and label file."""

from pathlib import Path

from socialirl.ingestion import write_events, write_labels
from socialirl.simulator import cohort_dataset

DATA = Path(__file__).resolve().parents[1] / "src" / "socialirl" / "data"

if __name__ == "__main__":
    events, scores = cohort_dataset()
    write_events(events, DATA / "synthetic_events.jsonl")
    write_labels(scores, DATA / "synthetic_labels.csv")
    print(f"{len(events)} events for {len(scores)} users -> {DATA}")
