"""Regenerate tests/fixtures/mini_bench.csv (20 problems x 100 fully labeled rows)."""

from pathlib import Path

from ppas.data import write_csv
from ppas.synth import SynthConfig, draw_batch

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "mini_bench.csv"

if __name__ == "__main__":
    cfg = SynthConfig(m=20, n=20, N=80, predictor="abs", seed=20240601)
    write_csv(draw_batch(cfg).to_problems(prefix="prob"), OUT)
    print(f"wrote {OUT}")
