"""Command-line entry point wiring the whole pipeline.

Subcommands: ingest, embed, stats, retrieve, classify, evaluate, export.
Exit codes: 0 ok, 1 operational error, 2 usage, 3 provider/transport.
Settings come from an optional JSON config file; flags override the file;
secrets come from environment variables only.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from causeway import annotation, embedding, evaluation, export, inference, retrieval
from causeway.errors import CausewayError, ProviderFailureError, TransportError
from causeway.store import GraphStore

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_OPERATIONAL = 1
EXIT_USAGE = 2
EXIT_PROVIDER = 3

DEFAULT_STORE_PATH = "causeway-graph.json"


@dataclass
class Config:
    store_path: str = DEFAULT_STORE_PATH
    provider: dict = field(default_factory=lambda: {"kind": "mock", "seed": 0})
    client: dict = field(default_factory=lambda: {"kind": "mock"})
    hybrid: dict = field(default_factory=dict)
    rules_path: str | None = None
    log_level: str = "WARNING"

    @classmethod
    def from_file(cls, path: str | Path) -> "Config":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = cls()
        for key in ("store_path", "rules_path", "log_level"):
            if key in raw:
                setattr(cfg, key, raw[key])
        for key in ("provider", "client", "hybrid"):
            if key in raw:
                getattr(cfg, key).update(raw[key])
        return cfg

    def hybrid_config(self, args) -> retrieval.HybridConfig:
        values = dict(self.hybrid)
        for key in ("alpha", "beta", "tau"):
            flag = getattr(args, key, None)
            if flag is not None:
                values[key] = flag
        top_k = getattr(args, "top_k", None)
        if top_k is not None:
            values["k"] = top_k
        return retrieval.HybridConfig(**values)

    def validate(self) -> None:
        retrieval.HybridConfig(**self.hybrid)
        if self.provider.get("kind", "mock") not in ("mock", "http"):
            raise ValueError(f"unknown provider kind {self.provider.get('kind')!r}")
        if self.client.get("kind", "mock") not in ("mock", "http"):
            raise ValueError(f"unknown client kind {self.client.get('kind')!r}")

    def make_provider(self, override_kind: str | None = None):
        kind = override_kind or self.provider.get("kind", "mock")
        if kind == "mock":
            return embedding.mock_provider(seed=int(self.provider.get("seed", 0)))
        if kind == "http":
            return embedding.HttpEmbeddingProvider(
                endpoint=self.provider["endpoint"],
                model=self.provider.get("model", "all-MiniLM-L6-v2"),
                api_key_env=self.provider.get(
                    "api_key_env", "CAUSEWAY_EMBED_API_KEY"
                ),
            )
        raise ValueError(f"unknown provider kind {kind!r}")

    def make_client(self):
        kind = self.client.get("kind", "mock")
        if kind == "mock":
            return inference.MockLLMClient()
        if kind == "http":
            return inference.HttpLLMClient(
                endpoint=self.client["endpoint"],
                model=self.client["model"],
                api_key_env=self.client.get("api_key_env", "CAUSEWAY_LLM_API_KEY"),
            )
        raise ValueError(f"unknown client kind {kind!r}")

    def make_budgeter(self) -> inference.RateBudgeter | None:
        rpm = self.client.get("requests_per_minute")
        tpm = self.client.get("tokens_per_minute")
        if rpm is None and tpm is None:
            return None
        return inference.RateBudgeter(requests_per_minute=rpm, tokens_per_minute=tpm)

    def load_rules(self) -> list[str] | None:
        if self.rules_path is None:
            return None
        from causeway.prompting import load_rules

        return load_rules(self.rules_path)


def _load_store(config: Config, must_exist: bool = True) -> GraphStore:
    path = Path(config.store_path)
    if path.exists():
        return GraphStore.load(path)
    if must_exist:
        raise CausewayError(f"no graph snapshot at {path}; run `ingest` first")
    return GraphStore()


def _emit(document: dict) -> None:
    print(json.dumps(document, indent=2, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causeway",
        description="Causal event graph: ingest, embed, retrieve, classify, evaluate.",
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--store", help="graph snapshot path (overrides config)")
    parser.add_argument("--log-level", help="logging level (overrides config)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a JSONL corpus into the graph")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=["json", "text"], default="text")

    p = sub.add_parser("embed", help="run the full embedding lifecycle")
    p.add_argument("--batch-size", type=int, default=embedding.DEFAULT_BATCH_SIZE)
    p.add_argument("--provider", choices=["mock", "http"])
    p.add_argument("--format", choices=["json", "text"], default="text")

    p = sub.add_parser("stats", help="node/edge/embedded counts")
    p.add_argument("--format", choices=["json", "text"], default="text")

    p = sub.add_parser("retrieve", help="hybrid query for similar events")
    p.add_argument("--query", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--top-k", type=int)
    p.add_argument("--format", choices=["json", "table"], default="table")

    p = sub.add_parser("classify", help="classify one sentence via the LLM client")
    p.add_argument("--sentence", required=True)
    p.add_argument("--emit-graph", metavar="OUT.dot")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--top-k", type=int)
    p.add_argument("--max-prompt-tokens", type=int)

    p = sub.add_parser("evaluate", help="top-k sweep against gold labels")
    p.add_argument("--test", required=True, help="JSONL with gold_label")
    p.add_argument("--k", default="5,10,15,20", help="comma-separated k values")
    p.add_argument("--out", help="report path (.json or .md)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--tau", type=float)

    p = sub.add_parser("export", help="emit DOT or Cypher text")
    p.add_argument("--format", choices=["dot", "cypher"], required=True)
    p.add_argument("--event", help="restrict DOT to one event subgraph")
    p.add_argument("--out", help="write to file instead of stdout")

    return parser


def _cmd_ingest(config: Config, args) -> int:
    store = _load_store(config, must_exist=False)
    report = annotation.ingest_corpus_file(args.corpus, store)
    store.save(config.store_path)
    if args.format == "json":
        _emit(report.as_dict())
    else:
        print(f"ingested {report.ingested} record(s), skipped {len(report.skipped)}")
        for kind, count in report.node_counts.items():
            print(f"  {kind.value}: {count}")
        print(f"  relationships: {report.total_edges}")
        for rec_id, reason in report.skipped:
            print(f"  skipped {rec_id}: {reason}")
    return EXIT_OK


def _cmd_embed(config: Config, args) -> int:
    store = _load_store(config)
    provider = config.make_provider(override_kind=args.provider)
    cleared = embedding.clean_embeddings(store)
    embedding.rebuild_indexes(store)
    report = embedding.batch_embed(store, provider, batch_size=args.batch_size)
    verification = embedding.verify(store)
    store.save(config.store_path)
    if args.format == "json":
        _emit(
            {
                "cleared": cleared,
                "embed": report.as_dict(),
                "verify": verification.as_dict(),
            }
        )
    else:
        print(
            f"cleared {cleared}, embedded {report.total_embedded} "
            f"in {report.batches_issued} batch(es) via {provider.name}"
        )
        for row in verification.rows:
            flag = "" if row.deficit == 0 else f"  (missing {row.deficit})"
            print(
                f"  {row.kind.value}: total={row.total} "
                f"with_text={row.with_text} embedded={row.embedded}{flag}"
            )
    return EXIT_OK


def _cmd_stats(config: Config, args) -> int:
    stats = _load_store(config).stats()
    if args.format == "json":
        _emit(stats.as_dict())
    else:
        for kind, count in stats.node_counts.items():
            embedded = stats.embedded_counts[kind]
            print(f"{kind.value}: {count} node(s), {embedded} embedded")
        for kind, count in stats.edge_counts.items():
            print(f"{kind.value}: {count} edge(s)")
        print(f"total: {stats.total_nodes} nodes, {stats.total_edges} edges")
    return EXIT_OK


def _cmd_retrieve(config: Config, args) -> int:
    store = _load_store(config)
    provider = config.make_provider()
    cfg = config.hybrid_config(args)
    results = retrieval.query(store, provider.embed(args.query), cfg)
    if args.format == "json":
        _emit({"query": args.query, "results": [r.as_dict() for r in results]})
    else:
        for r in results:
            print(
                f"{r.hybrid_score:.4f}  sim={r.embedding_similarity:.4f} "
                f"s={r.structural_score}  {r.event_id}  {r.event_text}"
            )
        if not results:
            print("(no events above threshold)")
    return EXIT_OK


def _cmd_classify(config: Config, args) -> int:
    store = _load_store(config)
    provider = config.make_provider()
    client = config.make_client()
    cfg = config.hybrid_config(args)
    verdict, trace = inference.classify(
        args.sentence,
        store,
        provider,
        client,
        cfg=cfg,
        rules=config.load_rules(),
        max_prompt_tokens=args.max_prompt_tokens,
        budgeter=config.make_budgeter(),
    )
    dot = inference.emit_graph_if_causal(verdict)
    if args.emit_graph and dot is not None:
        Path(args.emit_graph).write_text(dot, encoding="utf-8")
    _emit(
        {
            "label": verdict.label,
            "tagged_sentence": verdict.tagged_sentence,
            "trace": trace.as_dict(),
            "graph_written": bool(args.emit_graph and dot is not None),
        }
    )
    return EXIT_OK


def _cmd_evaluate(config: Config, args) -> int:
    store = _load_store(config)
    provider = config.make_provider()
    client = config.make_client()
    dataset = evaluation.load_eval_dataset(args.test)
    k_values = [int(k) for k in args.k.split(",") if k.strip()]
    cfg = config.hybrid_config(args)
    reports = evaluation.sweep(
        dataset,
        k_values,
        store,
        provider,
        client,
        cfg_base=cfg,
        rules=config.load_rules(),
        budgeter=config.make_budgeter(),
    )
    if args.out:
        out = Path(args.out)
        if out.suffix == ".md":
            out.write_text(evaluation.reports_to_markdown(reports), encoding="utf-8")
        else:
            out.write_text(evaluation.reports_to_json(reports), encoding="utf-8")
    print(evaluation.reports_to_markdown(reports), end="")
    return EXIT_OK


def _cmd_export(config: Config, args) -> int:
    store = _load_store(config)
    if args.format == "dot":
        if args.event:
            text = export.event_subgraph_dot(store, args.event)
        else:
            text = export.store_to_dot(store)
    else:
        text = export.store_to_cypher(store)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "embed": _cmd_embed,
    "stats": _cmd_stats,
    "retrieve": _cmd_retrieve,
    "classify": _cmd_classify,
    "evaluate": _cmd_evaluate,
    "export": _cmd_export,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors
        return int(exc.code or 0)

    try:
        config = Config.from_file(args.config) if args.config else Config()
        if args.store:
            config.store_path = args.store
        if args.log_level:
            config.log_level = args.log_level
        logging.basicConfig(level=config.log_level.upper())
        config.validate()
        return _COMMANDS[args.command](config, args)
    except (ProviderFailureError, TransportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (CausewayError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPERATIONAL


if __name__ == "__main__":
    sys.exit(main())
