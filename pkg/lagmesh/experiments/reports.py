"""Report formatting: CSV table, text summary and gnuplot script."""
import csv
import io
import math


CSV_HEADER = (
    'study', 'h', 'q', 'rho', 'p', 'sigma', 'K', 'kind',
    'ratio_min', 'ratio_max', 'slope', 'resid', 'warn'
)
CSV_NAME = 'report.csv'


def format_value(value):
    """
    Format one report value.

    None is empty, infinity is "inf", floats use 12 significant digits.
    """
    if value is None:
        return ''
    if isinstance(value, str):
        return value
    if isinstance(value, float):
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return f'{value:.12g}'
    return str(value)


def record_row(record):
    """CSV row of a CellRecord in CSV_HEADER order."""
    return [
        format_value(v) for v in (
            record.study, record.h, record.q, record.rho, record.p,
            record.sigma, record.K, record.kind, record.ratio_min,
            record.ratio_max, record.slope, record.resid, record.warn
        )
    ]


def format_csv(report):
    """
    Format a report as CSV text.

    :param report: ExperimentReport
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    writer.writerows(record_row(r) for r in report.records)
    return out.getvalue()


def format_text(report):
    """
    Format a report as key = value blocks.

    The provenance block comes first, then one block per cell.
    """
    lines = ['[provenance]']
    lines.extend(f'{key} = {value}' for key, value in report.provenance)
    for n, record in enumerate(report.records):
        lines.append('')
        lines.append(f'[cell {n}]')
        lines.extend(
            f'{key} = {value}'
            for key, value in zip(CSV_HEADER, record_row(record))
            if value
        )
    return '\n'.join(lines) + '\n'


def format_plot_script(report, csv_name=CSV_NAME):
    """
    Format a gnuplot script plotting ratio_max against h per series.

    :param report: ExperimentReport
    :param csv_name: Name of the CSV file the script reads
    """
    column = {name: n + 1 for n, name in enumerate(CSV_HEADER)}
    series = []
    for record in report.records:
        if not record.skipped and record.series() not in series:
            series.append(record.series())
    lines = [
        f'# {report.study} study',
        "set datafile separator ','",
        'set logscale xy',
        "set xlabel 'h'",
        "set ylabel 'ratio_max'",
        'set key outside',
    ]
    plots = []
    for study, kind, p, sigma, K in series:
        conditions = ' && '.join(
            f'strcol({column[name]}) eq "{format_value(value)}"'
            for name, value in (
                ('study', study), ('kind', kind), ('p', p),
                ('sigma', sigma), ('K', K)
            )
        )
        title = ' '.join(
            [study, kind] + [
                f'{name}={format_value(value)}'
                for name, value in (('p', p), ('sigma', sigma), ('K', K))
                if value is not None
            ]
        )
        plots.append(
            f"'{csv_name}' skip 1 using {column['h']}:"
            f"(({conditions}) ? ${column['ratio_max']} : 1/0) "
            f"with linespoints title '{title}'"
        )
    if plots:
        lines.append('plot ' + ', \\\n     '.join(plots))
    return '\n'.join(lines) + '\n'
