import os
from pathlib import Path

import numpy as np
import pytest

ADULT_ENV = "WGDRO_ADULT_CSV"
ADULT_DEFAULT = Path("/root/data/adult.csv")

COLUMNS = ["age", "workclass", "education", "race", "sex", "hours-per-week", "income"]
EDUCATION = ["HS-grad", "Bachelors", "Some-college", "Masters", "Doctorate", "11th"]
RACES = ["White", "Black", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other"]


def adult_path() -> Path | None:
    p = Path(os.environ.get(ADULT_ENV, ADULT_DEFAULT))
    return p if p.is_file() else None


def write_synthetic_adult(path: Path, n: int = 600, seed: int = 0, n_missing: int = 10) -> Path:
    """Adult-shaped CSV with every group and education level present."""
    rng = np.random.default_rng(seed)
    lines = [",".join(COLUMNS)]
    for i in range(n):
        race = RACES[i % len(RACES)] if i % 3 else "White"
        edu = EDUCATION[(i // 2) % len(EDUCATION)]
        edu_rank = EDUCATION.index(edu)
        age = int(rng.integers(18, 70))
        hours = int(rng.integers(10, 60))
        y = int(edu_rank in (1, 3, 4) and rng.random() < 0.7 or rng.random() < 0.15)
        work = "?" if i < n_missing else ["Private", "Self-emp", "Gov"][i % 3]
        income = ">50K" if y else "<=50K"
        if i % 7 == 0:
            income += "."  # test-file style label
        lines.append(f"{age}, {work}, {edu}, {race}, {'Male' if i % 2 else 'Female'}, {hours}, {income}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def synthetic_csv(tmp_path):
    return write_synthetic_adult(tmp_path / "adult_small.csv")


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
