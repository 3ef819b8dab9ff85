"""gnuplot script for rate-study output."""

import math
import os

from experiments.runner import RateTable
from utils.artifacts import format_float

RATE_TABLE_COLUMNS = [
    "n",
    "t",
    "nt",
    "n_replicates",
    "median_error",
    "q90_error",
    "mean_error",
    "theory_bound",
    "preconditions_hold",
]


def _column(name: str) -> int:
    return RATE_TABLE_COLUMNS.index(name) + 1


def rate_study_script(table: RateTable, csv_name: str = "rate_table.csv", png_name: str = "rate_study.png") -> str:
    """
    Log-log plot of median and 90% error against N*t with the rate bound and the fitted line.

    Args:
        table: Rate-study result
        csv_name: CSV file the script reads, relative to the script's directory
        png_name: Output image name

    Returns:
        gnuplot script text
    """
    nt = _column("nt")
    fit = f"{format_float(math.exp(table.fitted_intercept))} * x**({format_float(table.fitted_slope)})"
    lines = [
        "set terminal pngcairo size 900,600",
        f"set output '{png_name}'",
        "set datafile separator ','",
        "set logscale xy",
        "set key top right",
        "set grid",
        "set xlabel 'N t'",
        "set ylabel 'spectral error'",
        f"set title 'estimator error, fitted slope {table.fitted_slope:.3f}'",
        f"plot '{csv_name}' skip 1 using {nt}:{_column('median_error')} with linespoints title 'median', \\",
        f"     '' skip 1 using {nt}:{_column('q90_error')} with linespoints title '90% quantile', \\",
        f"     '' skip 1 using {nt}:{_column('theory_bound')} with lines dashtype 2 title 'bound (eps={table.eps:g})', \\",
        f"     {fit} with lines dashtype 3 title 'least-squares fit'",
    ]
    return "\n".join(lines) + "\n"


def write_rate_study_script(out_dir: str, table: RateTable, csv_name: str = "rate_table.csv") -> str:
    path = os.path.join(out_dir, "rate_study.gp")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(rate_study_script(table, csv_name))
    return path
