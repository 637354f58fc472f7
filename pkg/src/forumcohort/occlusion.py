"""Occlusion attribution: score deltas from masking words and phrases.

delta(span) = score(original) - score(occluded), where score is the
positive-class probability. Keyword models see occluded tokens deleted
before vectorization (a presence bit survives if the token also occurs
outside the span); the encoder sees occluded ids replaced by MASK, with
PAD positions left untouched.
"""

from __future__ import annotations

import html
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import SpanOutOfBounds
from .features import MASK_ID, PAD_ID
from .predictors import EncoderPredictor, KeywordPredictor, ModelKind, Predictor

Span = tuple[int, int]  # (start, length) in token coordinates


@dataclass(frozen=True)
class SpanDelta:
    start: int
    length: int
    delta: float


@dataclass(frozen=True)
class AttributionReport:
    post_id: str
    model_id: str
    base_score: float
    token_deltas: tuple[float, ...]
    span_deltas: tuple[SpanDelta, ...]
    max_phrase_len: int


def _check_span(span: Span, bound: int) -> None:
    start, length = span
    if start < 0 or length < 0 or start + length > bound:
        raise SpanOutOfBounds(f"span {span} does not fit in {bound} positions")


def occlude_tokens(tokens: Sequence[str], span: Span) -> list[str]:
    """Keyword-model occlusion: delete the span's tokens."""
    _check_span(span, len(tokens))
    start, length = span
    return list(tokens[:start]) + list(tokens[start + length :])


def occlude_sequence(ids: Sequence[int], span: Span) -> tuple[int, ...]:
    """Encoder occlusion: MASK the span's ids. The span is in token
    coordinates (position 0 is the first token after CLS); PAD stays PAD,
    so masking already-padded positions is a no-op."""
    _check_span(span, len(ids) - 1)
    start, length = span
    out = list(ids)
    for pos in range(start + 1, start + length + 1):
        if out[pos] != PAD_ID:
            out[pos] = MASK_ID
    return tuple(out)


def explain(
    post_id: str,
    tokens: Sequence[str],
    predictor: Predictor,
    max_phrase_len: int = 3,
) -> AttributionReport:
    """Evaluate every single token and every contiguous span of length
    2..max_phrase_len, in (start, length) order."""
    tokens = list(tokens)
    k = len(tokens)

    if predictor.kind is ModelKind.KEYWORD:
        assert isinstance(predictor, KeywordPredictor)
        base = predictor.score_tokens(tokens)

        def occluded_score(start: int, length: int) -> float:
            return predictor.score_tokens(occlude_tokens(tokens, (start, length)))

    else:
        assert isinstance(predictor, EncoderPredictor)
        base_ids = predictor.encode(tokens)
        base = predictor.score_ids(base_ids)
        # Tokens truncated away by the encoder cannot be occluded; their
        # spans are no-ops with delta exactly 0.
        capacity = len(base_ids) - 1

        def occluded_score(start: int, length: int) -> float:
            clipped_len = max(0, min(start + length, capacity) - start)
            if clipped_len == 0 or start >= capacity:
                return base
            return predictor.score_ids(occlude_sequence(base_ids, (start, clipped_len)))

    token_deltas = tuple(base - occluded_score(i, 1) for i in range(k))
    span_deltas = []
    for start in range(k):
        for length in range(2, max_phrase_len + 1):
            if start + length > k:
                break
            span_deltas.append(
                SpanDelta(start=start, length=length, delta=base - occluded_score(start, length))
            )
    return AttributionReport(
        post_id=post_id,
        model_id=predictor.model_id,
        base_score=base,
        token_deltas=token_deltas,
        span_deltas=tuple(span_deltas),
        max_phrase_len=max_phrase_len,
    )


def render_tsv(report: AttributionReport, tokens: Sequence[str]) -> str:
    """One row per token and per span: kind, start, length, text, delta."""
    lines = ["kind\tstart\tlength\ttext\tdelta"]
    for i, delta in enumerate(report.token_deltas):
        lines.append(f"token\t{i}\t1\t{tokens[i]}\t{delta!r}")
    for span in report.span_deltas:
        phrase = " ".join(tokens[span.start : span.start + span.length])
        lines.append(f"span\t{span.start}\t{span.length}\t{phrase}\t{span.delta!r}")
    return "\n".join(lines) + "\n"


def _heat_color(delta: float, norm: float) -> str:
    """Diverging scale: red for positive deltas, blue for negative."""
    if norm <= 0.0:
        return "rgb(255,255,255)"
    intensity = min(1.0, abs(delta) / norm)
    fade = round(255 * (1.0 - intensity))
    if delta >= 0:
        return f"rgb(255,{fade},{fade})"
    return f"rgb({fade},{fade},255)"


def render_html(report: AttributionReport, tokens: Sequence[str]) -> str:
    """Self-contained heatmap page; no external resources, deterministic bytes."""
    deltas = list(report.token_deltas) + [s.delta for s in report.span_deltas]
    norm = max((abs(d) for d in deltas), default=0.0)

    token_spans = []
    for i, (token, delta) in enumerate(zip(tokens, report.token_deltas)):
        token_spans.append(
            f'<span class="tok" style="background-color:{_heat_color(delta, norm)}" '
            f'title="position {i}, delta {delta!r}">{html.escape(token)}</span>'
        )

    span_rows = []
    for span in report.span_deltas:
        phrase = " ".join(tokens[span.start : span.start + span.length])
        span_rows.append(
            f"<tr><td>{span.start}</td><td>{span.length}</td>"
            f"<td>{html.escape(phrase)}</td><td>{span.delta!r}</td></tr>"
        )

    return (
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
        f"<title>occlusion report {html.escape(report.post_id)}</title>\n"
        "<style>\n"
        "body { font-family: sans-serif; margin: 2em; }\n"
        ".tok { padding: 2px 3px; margin: 1px; display: inline-block; "
        "border-radius: 3px; }\n"
        "table { border-collapse: collapse; margin-top: 1em; }\n"
        "td, th { border: 1px solid #999; padding: 2px 8px; }\n"
        "</style>\n</head>\n<body>\n"
        f"<h1>Occlusion report: {html.escape(report.post_id)}</h1>\n"
        f"<p>model {html.escape(report.model_id)}; base positive-class score "
        f"{report.base_score!r}; red pushes positive, blue pushes negative.</p>\n"
        f"<p>{''.join(token_spans)}</p>\n"
        "<table>\n<tr><th>start</th><th>length</th><th>phrase</th><th>delta</th></tr>\n"
        + "\n".join(span_rows)
        + "\n</table>\n</body>\n</html>\n"
    )


def write_report(
    report: AttributionReport, tokens: Sequence[str], out_dir: Path
) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    html_path = out_dir / f"{report.post_id}.html"
    tsv_path = out_dir / f"{report.post_id}.tsv"
    with open(html_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_html(report, tokens))
    with open(tsv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_tsv(report, tokens))
    return html_path, tsv_path
