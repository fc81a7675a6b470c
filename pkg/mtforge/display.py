# mtforge/display.py
"""
Terminal rendering for mtforge. Everything printed for a human goes through
MtForgeDisplay; machine outputs are written by the commands themselves.
"""

from typing import Dict, Iterable, List, Optional, Sequence

from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from mtforge.corpus_model import LanguageTag, display_names


class MtForgeDisplay:
    """Rich tables and status lines for the CLI."""

    def __init__(self, console: Console):
        self.console = console

    def status_update(self, message: str, status_type: str = "info"):
        """Display status updates with appropriate styling."""
        colors = {
            "info": "blue",
            "success": "green",
            "warning": "yellow",
            "error": "red",
        }
        icons = {
            "info": "ℹ",
            "success": "✓",
            "warning": "⚠",
            "error": "✗",
        }
        color = colors.get(status_type, "blue")
        icon = icons.get(status_type, "ℹ")
        self.console.print(f"[{color}]{icon} {escape(message)}[/{color}]", highlight=False)

    def wrote(self, path) -> None:
        self.console.print(f"[dim]   └─ wrote {path}[/dim]", highlight=False)

    def languages(self, registry: Sequence[LanguageTag]):
        table = Table(title=f"{len(registry)} languages", show_lines=False)
        for col in ("Code", "Name", "Script", "Family", "Subgrouping", "Resource"):
            table.add_column(col)
        for t in registry:
            table.add_row(t.code, t.name, t.script, t.family, t.subgrouping or "-", t.resource_class.value)
        self.console.print(table)

    def efficiency(self, eff_table):
        table = Table(title="Tokenization efficiency (length ratio vs English)")
        table.add_column("Language")
        for name in eff_table.tokenizers:
            table.add_column(name, justify="right")
        for label, values in eff_table.rows():
            table.add_row(label, *[f"{v:.2f}" for v in values])
        self.console.print(table)

    def published_efficiency(self, published: Dict[str, Dict[str, float]]):
        names = display_names()
        tokenizers = list(published)
        table = Table(title="Published tokenization efficiency")
        table.add_column("Language")
        for name in tokenizers:
            table.add_column(name, justify="right")
        labels = list(published[tokenizers[0]])
        for label in labels:
            shown = names.get(label, label)
            table.add_row(shown, *[f"{published[t][label]:.2f}" for t in tokenizers])
        self.console.print(table)

    def clean_stats(self, counts: Dict[str, int], parse_errors: int = 0):
        table = Table(title="Cleaning")
        table.add_column("Outcome")
        table.add_column("Pairs", justify="right")
        for reason, count in counts.items():
            style = "green" if reason == "OK" else ""
            table.add_row(f"[{style}]{reason}[/{style}]" if style else reason, f"{count:,}")
        if parse_errors:
            table.add_row("[yellow]rejected at parse[/yellow]", f"{parse_errors:,}")
        self.console.print(table)

    def mix_plan(self, plan, deviations: Optional[Sequence] = None):
        names = display_names()
        flagged = {(d.lang, d.pool) for d in deviations or [] if not d.accepted}
        known = {(d.lang, d.pool) for d in deviations or [] if not d.within() and d.known_exception}
        table = Table(title=f"PFMS plan, n = {plan.to_json()['budget_billions']}B tokens")
        for col in ("Language", "Mono", "EN-centric", "ZH-centric"):
            table.add_column(col, justify="left" if col == "Language" else "right")
        for code, alloc in plan.allocations.items():
            cells = []
            for pool, value in alloc.pools().items():
                text = "-" if value is None else f"{value:,}"
                if (code, pool) in flagged:
                    text = f"[red]{text}[/red]"
                elif (code, pool) in known:
                    text = f"[yellow]{text}[/yellow]"
                cells.append(text)
            table.add_row(names[code], *cells)
        totals = plan.totals()
        table.add_row("[bold]Total[/bold]", *[f"[bold]{totals[p]:,}[/bold]" for p in ("mono", "en_centric", "zh_centric")])
        self.console.print(table)

    def reproduction(self, rows: Iterable[Sequence[str]], title: str, columns: Sequence[str]):
        table = Table(title=title)
        for i, col in enumerate(columns):
            table.add_column(col, justify="left" if i == 0 else "right")
        for row in rows:
            table.add_row(*row)
        self.console.print(table)

    def sft_distribution(self, report):
        self.console.print(
            Panel(
                f"records: [bold]{report.total:,}[/bold] over {report.directions} directions\n"
                f"en-centric share: {report.en_centric_share:.2%}\n"
                f"zhs-centric share: {report.zhs_centric_share:.2%} "
                f"(overlap en<->zhs: {report.overlap:,})\n"
                f"zhs pairs without English: {report.zhs_non_english:,}\n"
                f"below threshold: {report.below_threshold:,}   errored: {report.errored:,}",
                title="SFT distribution",
                border_style="green",
                padding=(0, 1),
            )
        )

    def grouped_table(self, grouped):
        table = Table(title=" / ".join(grouped.metrics))
        table.add_column("System")
        for g in grouped.groups:
            table.add_column(g, justify="right")
        for s in grouped.systems:
            table.add_row(s, *[grouped.cell_text(s, g) for g in grouped.groups])
        self.console.print(table)
        if grouped.missing:
            self.status_update(f"{len(grouped.missing)} score(s) missing; cells shown as '-'", "warning")

    def bleu(self, score, label: str = "spBLEU"):
        tok = f" [dim](tokenizer: {score.tokenizer})[/dim]" if score.tokenizer else ""
        self.console.print(f"[bold]{label}[/bold] {score.score:.2f}{tok}", highlight=False)
        self.console.print(f"[dim]{score}[/dim]", highlight=False)

    def issues(self, title: str, lines: List[str]):
        if not lines:
            return
        self.console.print(Panel("\n".join(lines), title=title, border_style="yellow", padding=(0, 1)))
