"""Writes approximate GBR and ISR policy timelines in the Data Hub column layout.

Policy dates and test/vaccine volumes follow the public record only roughly.
Outcome columns (confirmed, deaths, hosp) are left empty: these files drive
simulations and scenarios, not calibration.
"""

import csv
from datetime import date, timedelta
from pathlib import Path

START = date(2020, 1, 22)
DAYS = 650

COLUMNS = [
    "date", "confirmed", "deaths", "hosp", "tests", "vaccines",
    "stay_home_restrictions", "school_closing", "workplace_closing",
    "testing_policy", "contact_tracing", "international_movement_restrictions",
]

# (first day, stay_home, school, workplace, testing, tracing, international)
GBR = [
    ("2020-01-22", 0, 0, 0, 0, 0, 0),
    ("2020-03-01", 0, 0, 0, 1, 1, 1),
    ("2020-03-16", 0, 1, 1, 1, 1, 3),
    ("2020-03-23", 2, 3, 3, 1, 1, 3),
    ("2020-05-28", 2, 3, 2, 2, 2, 3),
    ("2020-06-01", 0, 2, 2, 2, 2, 3),
    ("2020-09-01", 0, 1, 1, 3, 2, 3),
    ("2020-10-14", 0, 1, 2, 3, 2, 3),
    ("2020-11-05", 2, 1, 3, 3, 2, 3),
    ("2020-12-02", 0, 1, 2, 3, 2, 3),
    ("2021-01-06", 2, 3, 3, 3, 2, 4),
    ("2021-03-08", 2, 1, 3, 3, 2, 4),
    ("2021-03-29", 0, 1, 2, 3, 2, 4),
    ("2021-05-17", 0, 1, 1, 3, 2, 3),
    ("2021-07-19", 0, 1, 1, 3, 1, 2),
]

ISR = [
    ("2020-01-22", 0, 0, 0, 0, 0, 0),
    ("2020-02-26", 0, 0, 0, 1, 1, 2),
    ("2020-03-12", 0, 3, 1, 1, 2, 3),
    ("2020-03-19", 1, 3, 3, 1, 2, 4),
    ("2020-05-04", 0, 2, 2, 2, 2, 4),
    ("2020-05-17", 0, 1, 1, 2, 2, 4),
    ("2020-07-17", 0, 1, 2, 3, 2, 4),
    ("2020-09-18", 2, 3, 3, 3, 2, 4),
    ("2020-10-18", 0, 3, 2, 3, 2, 4),
    ("2020-11-01", 0, 2, 2, 3, 2, 4),
    ("2020-12-27", 2, 2, 3, 3, 2, 4),
    ("2021-02-07", 0, 2, 2, 3, 2, 4),
    ("2021-03-07", 0, 1, 1, 3, 2, 3),
    ("2021-06-01", 0, 1, 1, 3, 1, 3),
]

# Daily volumes as (day from start, value) knots, interpolated linearly.
GBR_TESTS = [(0, 0), (40, 2_000), (70, 15_000), (120, 120_000), (250, 250_000),
             (300, 350_000), (350, 600_000), (420, 1_000_000), (650, 1_100_000)]
GBR_VACCINES = [(0, 0), (353, 0), (354, 150_000), (370, 350_000), (400, 450_000),
                (470, 500_000), (560, 200_000), (650, 100_000)]
ISR_TESTS = [(0, 0), (40, 300), (80, 8_000), (130, 12_000), (230, 40_000),
             (300, 60_000), (380, 90_000), (500, 60_000), (650, 120_000)]
ISR_VACCINES = [(0, 0), (332, 0), (333, 60_000), (350, 150_000), (390, 120_000),
                (430, 60_000), (500, 10_000), (570, 5_000), (580, 80_000), (650, 40_000)]


def interp(knots, day):
    for (d0, v0), (d1, v1) in zip(knots, knots[1:]):
        if d0 <= day <= d1:
            return v0 + (v1 - v0) * (day - d0) / (d1 - d0)
    return knots[-1][1]


def write(path, segments, tests, vaccines):
    starts = [(date.fromisoformat(s[0]), s[1:]) for s in segments]
    total_tests = 0
    total_vaccines = 0
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(COLUMNS)
        for k in range(DAYS):
            day = START + timedelta(days=k)
            policy = [p for s, p in starts if s <= day][-1]
            total_tests += round(interp(tests, k))
            total_vaccines += round(interp(vaccines, k))
            w.writerow([day.isoformat(), "", "", "", total_tests, total_vaccines, *policy])


if __name__ == "__main__":
    here = Path(__file__).parent
    write(here / "gbr.csv", GBR, GBR_TESTS, GBR_VACCINES)
    write(here / "isr.csv", ISR, ISR_TESTS, ISR_VACCINES)
