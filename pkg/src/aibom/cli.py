"""Command-line interface: ``aibom validate|coverage|modelcard|ingest|fields``.

Exit codes: 0 success, 1 validation or coverage failure, 2 usage, IO or parse
error.
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone
from fractions import Fraction
from typing import Optional, Sequence

from aibom import __version__
from aibom.catalog import PROFILES, default_catalog
from aibom.compliance import (
    BUILTIN_MATRICES,
    MappingError,
    ModelLookupError,
    Status,
    builtin_matrix,
    coverage_report,
    default_modelcard_mapping,
    generate_model_card,
    load_matrix,
    load_modelcard_mapping,
)
from aibom.conformance import PolicyError, ValidationReport, default_policy, load_policy, validate
from aibom.hub import (
    FetchError,
    HubRecordError,
    RulesError,
    automation_counts,
    default_ingestion_rules,
    fetch_hub_record,
    load_ingestion_rules,
    map_hub_record,
    parse_hub_record,
    record_from_json,
)
from aibom.serialization import ReadError, WriteError, dump_tree, read_document, write_document

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class CliError(Exception):
    """Reported on standard error with exit status 2."""


def _read_bytes(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from None


def _load_doc(path: str):
    try:
        return read_document(_read_bytes(path))
    except ReadError as exc:
        raise CliError(f"{path}: {exc}") from None


def _report_tree(path: str, report: ValidationReport) -> dict:
    return {
        "file": path,
        "policy": report.policy_name,
        "verdict": report.verdict.value,
        "counts": dict(report.counts),
        "findings": [
            {"path": f.path, "code": f.code, "severity": f.severity.value, "message": f.message}
            for f in report.findings
        ],
    }


def _report_text(path: str, report: ValidationReport) -> str:
    lines = [f"== {path} (policy {report.policy_name})"]
    for f in report.findings:
        lines.append(f"{f.severity.value.upper():7} {f.code:17} {f.path}: {f.message}")
    c = report.counts
    lines.append(f"verdict: {report.verdict.value} (errors {c['error']}, warnings {c['warning']}, info {c['info']})")
    return "\n".join(lines)


def cmd_validate(args: argparse.Namespace) -> int:
    policy = load_policy(_read_bytes(args.policy)) if args.policy else default_policy()
    status = EXIT_OK
    trees = []
    for path in args.files:
        try:
            doc, read_findings = _load_doc(path)
        except CliError as exc:
            print(f"aibom: error: {exc}", file=sys.stderr)
            status = EXIT_USAGE
            continue
        report = validate(doc, policy, read_findings)
        if report.verdict.value == "fail" and status == EXIT_OK:
            status = EXIT_FAIL
        if args.format == "machine":
            trees.append(_report_tree(path, report))
        else:
            print(_report_text(path, report))
    if args.format == "machine" and trees:
        sys.stdout.write(dump_tree({"reports": trees}).decode("utf-8"))
    return status


def _fraction(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number or ratio: {text!r}") from None
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError("threshold must lie in [0, 1]")
    return value


def cmd_coverage(args: argparse.Namespace) -> int:
    if args.matrix in BUILTIN_MATRICES:
        matrix = builtin_matrix(args.matrix)
    elif args.matrix.endswith((".yaml", ".yml")) or "/" in args.matrix:
        matrix = load_matrix(_read_bytes(args.matrix))
    else:
        raise CliError(f"unknown matrix {args.matrix!r} (built-ins: {', '.join(BUILTIN_MATRICES)}, or a file path)")
    doc, _ = _load_doc(args.file)
    report = coverage_report(doc, matrix)
    if args.format == "machine":
        tree = {
            "regulation": report.regulation,
            "satisfied": report.satisfied,
            "total": report.total,
            "obligations": [
                {"id": r.obligation_id, "status": r.status.value, "evidence": list(r.evidence)}
                for r in report.per_obligation
            ],
        }
        sys.stdout.write(dump_tree(tree).decode("utf-8"))
    else:
        print(f"regulation: {report.regulation}")
        for r in report.per_obligation:
            print(f"{r.status.value:11} {r.obligation_id}")
        print(
            f"summary: {report.summary} satisfied "
            f"(partial {report.count(Status.PARTIAL)}, missing {report.count(Status.MISSING)}, "
            f"unmappable {report.count(Status.UNMAPPABLE)})"
        )
    if args.min_satisfied is not None and Fraction(report.satisfied, report.total) < args.min_satisfied:
        print(f"aibom: coverage {report.summary} is below {args.min_satisfied}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_modelcard(args: argparse.Namespace) -> int:
    mapping = load_modelcard_mapping(_read_bytes(args.mapping)) if args.mapping else default_modelcard_mapping()
    doc, _ = _load_doc(args.file)
    card = generate_model_card(doc, args.model, mapping)
    sys.stdout.write(card.text)
    print(f"\nextraction-rate: {len(card.populated_sections)}/{card.total_sections}")
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    rules = load_ingestion_rules(_read_bytes(args.rules)) if args.rules else default_ingestion_rules()
    if args.record:
        record = parse_hub_record(_read_bytes(args.record))
    else:
        base_url, model_id = args.fetch
        body = fetch_hub_record(base_url, model_id, timeout=args.timeout)
        now = datetime.now(timezone.utc).replace(microsecond=0)
        record = record_from_json(body, f"{base_url.rstrip('/')}/{model_id}", now)
    result = map_hub_record(record, rules)
    data = write_document(result.document)
    try:
        with open(args.out, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc.strerror or exc}") from None
    for f in result.findings:
        print(f"aibom: warning: {f.code} {f.path}: {f.message}", file=sys.stderr)
    try:
        populated, total = automation_counts(result.document, "ai")
        print(f"automation-rate: {populated / total:.2f} ({populated}/{total})")
    except ValueError:
        print("automation-rate: n/a (no model fields mapped)")
    print("unmapped-keys: " + (", ".join(result.unmapped_keys) or "none"))
    return EXIT_OK


def cmd_fields(args: argparse.Namespace) -> int:
    profiles = [args.profile] if args.profile else list(PROFILES)
    for profile in profiles:
        for desc in default_catalog().for_profile(profile):
            aliases = f"  (alias: {', '.join(desc.aliases)})" if desc.aliases else ""
            print(f"{desc.ref:40} {desc.value_kind:20} {desc.cardinality}{aliases}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aibom", description="Validate and analyze AI bills of materials.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("validate", help="check documents against a conformance policy")
    p.add_argument("files", nargs="+", metavar="FILE")
    p.add_argument("--policy", help="policy file (default: the shipped policy)")
    p.add_argument("--format", choices=("text", "machine"), default="text")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("coverage", help="regulation coverage of a document")
    p.add_argument("file", metavar="FILE")
    p.add_argument("--matrix", required=True, help=f"one of {', '.join(BUILTIN_MATRICES)} or a matrix file")
    p.add_argument("--min-satisfied", type=_fraction, help="exit 1 below this satisfied share (e.g. 0.95 or 13/14)")
    p.add_argument("--format", choices=("text", "machine"), default="text")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("modelcard", help="render a model card for one model")
    p.add_argument("file", metavar="FILE")
    p.add_argument("--model", required=True, help="element id of the AiPackage")
    p.add_argument("--mapping", help="model-card mapping file (default: 20-section layout)")
    p.set_defaults(func=cmd_modelcard)

    p = sub.add_parser("ingest", help="build a partial document from hub metadata")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--record", help="hub intake file")
    src.add_argument("--fetch", nargs=2, metavar=("BASE_URL", "MODEL_ID"), help="fetch from a hub API")
    p.add_argument("--rules", help="ingestion rules file (default: shipped rules)")
    p.add_argument("--timeout", type=float, default=10.0, help="fetch timeout in seconds")
    p.add_argument("--out", required=True, help="where to write the partial document")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fields", help="list the field catalog")
    p.add_argument("--profile", choices=PROFILES)
    p.set_defaults(func=cmd_fields)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (
        CliError,
        PolicyError,
        MappingError,
        ModelLookupError,
        HubRecordError,
        RulesError,
        FetchError,
        WriteError,
    ) as exc:
        print(f"aibom: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
