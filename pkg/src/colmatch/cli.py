"""Command-line front end: profile, embed, match, eval, scale.

Settings come from an optional key=value config file with flag overrides
(flags win). Data goes to stdout, logs to stderr. Exit codes: 0 success,
2 input error, 3 provider error, 4 missing-embedding error.
"""

from __future__ import annotations

import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import click

from .embedding import (
    DEFAULT_CHUNK_SIZE,
    DEFAULT_DIM,
    EmptyColumnError,
    HashEmbedder,
    Provider,
    ProviderError,
    RemoteEmbedder,
    embed_column,
    embed_metadata,
)
from .evaluation import (
    EvaluationError,
    GroundTruth,
    accuracy_at_k,
    load_ground_truth,
    render_results,
    scaling_experiment,
)
from .ingest import (
    ColumnRef,
    DatabaseHandle,
    IngestError,
    list_column_refs,
    load_database,
    profile_column,
    profile_database,
)
from .matcher import (
    EmbeddedColumn,
    MatchConfig,
    MatcherError,
    MatchMode,
    MissingEmbeddingError,
    match_columns,
    parse_report,
    report_to_json,
)
from .store import EmbeddingStore, StoreError

EXIT_INPUT_ERROR = 2
EXIT_PROVIDER_ERROR = 3
EXIT_MISSING_EMBEDDINGS = 4

_MODE_ALIASES = {
    "values": MatchMode.VALUES_ONLY,
    "metadata": MatchMode.METADATA_RERANK,
    "names": MatchMode.NAME_ONLY,
}


class ConfigError(Exception):
    pass


_CONFIG_KEYS = {
    "reference",
    "unknown",
    "columns",
    "store",
    "provider",
    "endpoint",
    "dim",
    "chunk_size",
    "k",
    "threshold",
    "mode",
    "seed",
    "jobs",
    "truth",
    "counts",
}


def load_config_file(path: Path | str) -> dict[str, str]:
    """Parse the key = value config format (# comments, optional quotes)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    settings: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        settings[key] = value
    return settings


def _split_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def _err(message: str) -> None:
    click.echo(message, err=True)


def _fail(message: str, code: int) -> None:
    _err(f"error: {message}")
    sys.exit(code)


def _guarded(body: Callable[[], None]) -> None:
    try:
        body()
    except MissingEmbeddingError as exc:
        _err("error: missing embeddings; run `colmatch embed` first")
        for key in exc.missing_keys:
            _err(f"  missing: {key}")
        sys.exit(EXIT_MISSING_EMBEDDINGS)
    except ProviderError as exc:
        _fail(str(exc), EXIT_PROVIDER_ERROR)
    except (ConfigError, IngestError, StoreError, MatcherError, EvaluationError) as exc:
        _fail(str(exc), EXIT_INPUT_ERROR)
    except OSError as exc:
        _fail(str(exc), EXIT_INPUT_ERROR)


class Settings:
    """Merged view of config-file values and command-line flags."""

    def __init__(self, config_path: str | None):
        self.file = load_config_file(config_path) if config_path else {}

    def get(self, key: str, flag_value, default=None, cast=None):
        if flag_value is not None:
            return flag_value
        if key in self.file:
            raw = self.file[key]
            return cast(raw) if cast else raw
        return default

    def require(self, key: str, flag_value, what: str, cast=None):
        value = self.get(key, flag_value, cast=cast)
        if value is None:
            raise ConfigError(f"{what} is required (flag or config key {key!r})")
        return value


def _parse_mode(raw: str) -> MatchMode:
    if raw in _MODE_ALIASES:
        return _MODE_ALIASES[raw]
    try:
        return MatchMode(raw)
    except ValueError:
        raise ConfigError(
            f"unknown mode {raw!r} (expected values, metadata, or names)"
        ) from None


def _load_db(path_str: str) -> DatabaseHandle:
    path = Path(path_str)
    return load_database(path, path.name)


def _make_provider(settings: Settings, provider, endpoint, dim, chunk_size) -> tuple[Provider, int]:
    provider_id = settings.get("provider", provider, default="hash")
    dim = settings.get("dim", dim, default=DEFAULT_DIM, cast=int)
    chunk = settings.get("chunk_size", chunk_size, default=DEFAULT_CHUNK_SIZE, cast=int)
    if provider_id == "hash":
        return HashEmbedder(dim=dim), chunk
    if provider_id == "remote":
        url = settings.require("endpoint", endpoint, "remote endpoint")
        remote = RemoteEmbedder(endpoint=url, dim=dim)
        health = remote.health()
        if health.get("dim") != dim:
            raise ProviderError(
                f"endpoint serves dim {health.get('dim')}, configured dim is {dim}"
            )
        return remote, chunk
    raise ConfigError(f"unknown provider {provider_id!r} (expected hash or remote)")


# Shared option declarations

_config_opt = click.option("--config", "config_path", type=click.Path(), default=None, help="Config file (key = value lines; flags override).")
_store_opt = click.option("--store", "store_path", type=click.Path(), default=None, help="Embedding store directory.")
_provider_opt = click.option("--provider", type=click.Choice(["hash", "remote"]), default=None)
_endpoint_opt = click.option("--endpoint", default=None, help="Remote embedding service URL.")
_dim_opt = click.option("--dim", type=int, default=None, help=f"Embedding dimension (default {DEFAULT_DIM}).")
_chunk_opt = click.option("--chunk-size", type=int, default=None, help=f"Values per embedding batch (default {DEFAULT_CHUNK_SIZE}).")
_k_opt = click.option("--k", type=int, default=None, help="Top-k matches (default 3).")
_threshold_opt = click.option("--threshold", type=float, default=None, help="Value-similarity threshold (default 0.4).")
_mode_opt = click.option("--mode", default=None, help="values | metadata | names.")
_seed_opt = click.option("--seed", type=int, default=None, help="Sampling seed (default 0).")
_jobs_opt = click.option("--jobs", type=int, default=None, help="Parallel embedding jobs (default 1).")
_reference_opt = click.option("--reference", "reference_path", type=click.Path(), default=None, help="Reference database directory.")
_unknown_opt = click.option("--unknown", "unknown_paths", type=click.Path(), multiple=True, help="Unknown database directory (repeatable).")
_columns_opt = click.option("--columns", default=None, help="Comma-separated reference columns of interest.")


@click.group()
def main() -> None:
    """Match columns between a reference database and unknown databases."""


@main.command("profile")
@click.argument("db_path", type=click.Path())
@click.option("--name", default=None, help="Database name (default: directory name).")
@click.option("--format", "fmt", type=click.Choice(["table", "json"]), default="table")
def cmd_profile(db_path: str, name: str | None, fmt: str) -> None:
    """Print per-column name, type, tables, and value counts."""

    def body() -> None:
        db = load_database(Path(db_path), name or Path(db_path).name)
        profiles = profile_database(db)
        if fmt == "json":
            import json

            doc = [
                {
                    "column": p.ref.column_name,
                    "dtype": p.dtype.value,
                    "tables": list(p.ref.tables),
                    "unique_count": len(p.unique_values),
                    "total_count": p.total_count,
                    "null_count": p.null_count,
                }
                for p in profiles
            ]
            click.echo(json.dumps(doc, indent=2))
            return
        for p in profiles:
            tables = ", ".join(p.ref.tables)
            click.echo(
                f"{p.ref.column_name}: {p.dtype.value}, uniques {len(p.unique_values)}, "
                f"total {p.total_count}, nulls {p.null_count} [{tables}]"
            )

    _guarded(body)


@main.command("embed")
@_config_opt
@_reference_opt
@_unknown_opt
@_store_opt
@_provider_opt
@_endpoint_opt
@_dim_opt
@_chunk_opt
@_jobs_opt
@click.option("--force", is_flag=True, default=False, help="Re-embed keys already in the store.")
def cmd_embed(
    config_path, reference_path, unknown_paths, store_path, provider, endpoint,
    dim, chunk_size, jobs, force,
) -> None:
    """Populate the embedding store for all configured databases."""

    def body() -> None:
        settings = Settings(config_path)
        db_paths = []
        ref = settings.get("reference", reference_path)
        if ref:
            db_paths.append(ref)
        unknowns = list(unknown_paths) or _split_list(settings.file.get("unknown", ""))
        db_paths.extend(unknowns)
        if not db_paths:
            raise ConfigError("no databases configured (reference/unknown)")

        embedder, chunk = _make_provider(settings, provider, endpoint, dim, chunk_size)
        store = EmbeddingStore.create(
            settings.require("store", store_path, "store path"),
            embedder.provider_id,
            embedder.dim,
        )
        workers = settings.get("jobs", jobs, default=1, cast=int)

        handles = [_load_db(p) for p in db_paths]
        jobs_list: list[tuple[DatabaseHandle, ColumnRef]] = [
            (db, ref) for db in handles for ref in list_column_refs(db)
        ]

        embedded = skipped = empty = 0

        def run_one(job: tuple[DatabaseHandle, ColumnRef]) -> str:
            db, ref = job
            if not force and store.has(ref):
                return "skipped"
            profile = profile_column(db, ref.column_name)
            try:
                col_emb = embed_column(profile, embedder, chunk)
            except EmptyColumnError:
                return "empty"
            store.put(col_emb, embed_metadata(ref, profile.dtype, embedder))
            return "embedded"

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(run_one, jobs_list))
        else:
            outcomes = [run_one(job) for job in jobs_list]
        for db_ref, outcome in zip(jobs_list, outcomes):
            if outcome == "embedded":
                embedded += 1
            elif outcome == "skipped":
                skipped += 1
            else:
                empty += 1
                _err(f"skipped (no embeddable values): {db_ref[1].key()}")

        _err(f"embedded {embedded}, skipped {skipped} up-to-date, {empty} empty")

    _guarded(body)


@main.command("match")
@_config_opt
@_reference_opt
@_unknown_opt
@_columns_opt
@_store_opt
@_k_opt
@_threshold_opt
@_mode_opt
@click.option("--output", type=click.Path(), default=None, help="Write the report here instead of stdout.")
def cmd_match(
    config_path, reference_path, unknown_paths, columns, store_path,
    k, threshold, mode, output,
) -> None:
    """Produce a match report from stored embeddings."""

    def body() -> None:
        settings = Settings(config_path)
        reference = _load_db(settings.require("reference", reference_path, "reference database"))
        unknown_list = list(unknown_paths) or _split_list(settings.file.get("unknown", ""))
        if not unknown_list:
            raise ConfigError("at least one unknown database is required")
        column_list = (
            _split_list(columns) if columns else _split_list(settings.file.get("columns", ""))
        )
        if not column_list:
            raise ConfigError("columns of interest are required")

        store = EmbeddingStore.open(settings.require("store", store_path, "store path"))
        config = MatchConfig(
            k=settings.get("k", k, default=3, cast=int),
            threshold=settings.get("threshold", threshold, default=0.4, cast=float),
            mode=_parse_mode(settings.get("mode", mode, default="values")),
        )
        report = match_columns(
            reference=reference,
            columns_of_interest=column_list,
            unknowns=[_load_db(p) for p in unknown_list],
            store=store,
            config=config,
        )
        text = report_to_json(report)
        if output:
            Path(output).write_text(text, encoding="utf-8")
            _err(f"report written to {output}")
        else:
            click.echo(text, nl=False)

    _guarded(body)


@main.command("eval")
@click.argument("report_path", type=click.Path())
@click.argument("truth_path", type=click.Path())
@_k_opt
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "table"]), default="table")
def cmd_eval(report_path: str, truth_path: str, k: int | None, fmt: str) -> None:
    """Score a match report against ground truth at k = 1..K."""

    def body() -> None:
        report_file = Path(report_path)
        if not report_file.exists():
            raise EvaluationError(f"report file not found: {report_file}")
        report = parse_report(report_file.read_text(encoding="utf-8"))
        truth = load_ground_truth(truth_path)
        max_k = k if k is not None else report.config.k
        results = [accuracy_at_k(report, truth, kk) for kk in range(1, max_k + 1)]
        click.echo(render_results(results, fmt), nl=False)

    _guarded(body)


@main.command("scale")
@_config_opt
@_reference_opt
@_unknown_opt
@_columns_opt
@_store_opt
@_k_opt
@_threshold_opt
@_mode_opt
@_seed_opt
@click.option("--truth", "truth_path", type=click.Path(), default=None, help="Ground truth JSON.")
@click.option("--counts", default=None, help="Comma-separated distractor counts; 'all' = whole pool.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "table"]), default="csv")
def cmd_scale(
    config_path, reference_path, unknown_paths, columns, store_path,
    k, threshold, mode, seed, truth_path, counts, fmt,
) -> None:
    """Run the distractor-scaling experiment from stored embeddings."""

    def body() -> None:
        settings = Settings(config_path)
        reference = _load_db(settings.require("reference", reference_path, "reference database"))
        unknown_list = list(unknown_paths) or _split_list(settings.file.get("unknown", ""))
        if not unknown_list:
            raise ConfigError("at least one unknown database is required")
        column_list = (
            _split_list(columns) if columns else _split_list(settings.file.get("columns", ""))
        )
        if not column_list:
            raise ConfigError("columns of interest are required")
        truth = load_ground_truth(settings.require("truth", truth_path, "ground truth path"))

        store = EmbeddingStore.open(settings.require("store", store_path, "store path"))
        config = MatchConfig(
            k=settings.get("k", k, default=3, cast=int),
            threshold=settings.get("threshold", threshold, default=0.4, cast=float),
            mode=_parse_mode(settings.get("mode", mode, default="values")),
        )

        missing: list[str] = []

        def fetch(ref: ColumnRef) -> EmbeddedColumn | None:
            if not store.has(ref):
                missing.append(ref.key())
                return None
            return store.get(ref)

        queries = []
        for name in column_list:
            tables = reference.tables_for(name)
            if not tables:
                raise ConfigError(f"unknown reference column: {name}")
            resolved = fetch(ColumnRef(reference.name, name, tables))
            if resolved:
                queries.append(resolved)

        truth_keys = {
            f"{e.truth_db}__{e.truth_column}" for e in truth.entries if e.has_truth
        }
        true_pool: list[EmbeddedColumn] = []
        distractor_pool: list[EmbeddedColumn] = []
        for db_path in unknown_list:
            db = _load_db(db_path)
            for ref in list_column_refs(db):
                resolved = fetch(ref)
                if resolved is None:
                    continue
                if ref.key() in truth_keys:
                    true_pool.append(resolved)
                else:
                    distractor_pool.append(resolved)
        if missing:
            raise MissingEmbeddingError(missing)

        raw_counts = _split_list(settings.get("counts", counts, default="0,20,50,all"))
        try:
            parsed_counts = [
                len(distractor_pool) if item == "all" else int(item)
                for item in raw_counts
            ]
        except ValueError:
            raise ConfigError(f"counts must be integers or 'all': {raw_counts}") from None
        results = scaling_experiment(
            queries=queries,
            truth=truth,
            true_pool=true_pool,
            distractor_pool=distractor_pool,
            counts=parsed_counts,
            seed=settings.get("seed", seed, default=0, cast=int),
            config=config,
        )
        click.echo(render_results(results, fmt), nl=False)

    _guarded(body)


if __name__ == "__main__":
    main()
