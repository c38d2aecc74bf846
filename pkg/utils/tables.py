"""
Tabular outputs: spectrum and trajectory CSVs, optional XLSX workbook, report.json
"""

import json
import logging
from pathlib import Path

import pandas as pd

logger = logging.getLogger(__name__)

SHEET_NAME_LIMIT = 31


def spectrum_frame(spec):
    """Spectrum as a freq_hz / psd / psd_stderr DataFrame."""
    return pd.DataFrame({"freq_hz": spec.freqs, "psd": spec.psd, "psd_stderr": spec.psd_stderr})


def spectrum_metadata(spec):
    return {
        "units": spec.units,
        "window": spec.window,
        "n_averages": int(spec.n_averages),
        "record_seconds": float(spec.record_seconds),
        "df_hz": float(spec.df),
    }


class TableWriter:
    """Writes experiment reports into an output directory."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def write_spectrum(self, name, spec):
        path = self.out_dir / f"{name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as handle:
            for key, value in spectrum_metadata(spec).items():
                handle.write(f"# {key}: {value}\n")
            spectrum_frame(spec).to_csv(handle, index=False)
        logger.debug("wrote spectrum %s (%d bins)", path, spec.freqs.size)
        return path

    def write_table(self, name, df):
        path = self.out_dir / f"{name}.csv"
        df.to_csv(path, index=False)
        logger.debug("wrote table %s (%d rows)", path, len(df))
        return path

    def write_workbook(self, report, name="report.xlsx"):
        """One sheet per spectrum and table."""
        path = self.out_dir / name
        with pd.ExcelWriter(path, engine="openpyxl") as writer:
            summary = pd.DataFrame(
                [(key, q.value, q.stderr) for key, q in sorted(report.derived.items())],
                columns=["quantity", "value", "stderr"],
            )
            summary.to_excel(writer, sheet_name="derived", index=False)
            for key, spec in report.spectra.items():
                spectrum_frame(spec).to_excel(writer, sheet_name=key[:SHEET_NAME_LIMIT], index=False)
            for key, df in report.tables.items():
                df.to_excel(writer, sheet_name=key[:SHEET_NAME_LIMIT], index=False)
        return path

    def write_report(self, report, name="report.json"):
        path = self.out_dir / name
        path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return path

    def write_all(self, report, xlsx=False):
        """Every spectrum, table and the JSON summary; returns the report.json path."""
        for key, spec in report.spectra.items():
            self.write_spectrum(key, spec)
        for key, df in report.tables.items():
            self.write_table(key, df)
        if xlsx:
            self.write_workbook(report)
        path = self.write_report(report)
        logger.info("wrote %d spectra and %d tables to %s", len(report.spectra), len(report.tables),
                    self.out_dir)
        return path
