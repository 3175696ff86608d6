"""Turn gene-inclusion words into scored trees.

Two interchangeable backends satisfy the same contract: a deterministic
synthetic model (for tests and desk-scale runs) and an external backend
that concatenates per-gene alignments into a supermatrix and shells out to
an inference command.  A caching wrapper with single-flight semantics sits
in front of either so no word is ever evaluated twice.
"""

from __future__ import annotations

import hashlib
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from .newick import (
    Bipartition,
    Node,
    Tree,
    lowest_support,
    parse_newick,
    serialize_newick,
    topology_key,
)
from .words import GeneWord, Score, fitness


class EvaluationError(RuntimeError):
    """A backend failed to score a word; carries the word and diagnostics."""

    def __init__(self, word: GeneWord, message: str):
        super().__init__(f"evaluation of {word} failed: {message}")
        self.word = word
        self.diagnostics = message


class InputError(ValueError):
    """Bad evaluator inputs (alignments, taxa sets, configuration)."""


@dataclass(frozen=True)
class ScoredTree:
    """One evaluation result: the inferred tree plus its derived identity."""

    word: GeneWord
    tree: Tree
    score: Score
    topology: str

    @property
    def newick(self) -> str:
        return serialize_newick(self.tree)


@dataclass(frozen=True)
class EvalOutcome:
    """What the caching layer hands back for one requested word.

    ``fresh`` is True when this call actually hit the backend (and so is the
    one that must be journaled); cache replays come back with fresh=False.
    """

    word: GeneWord
    result: Optional[ScoredTree]
    error: Optional[str]
    seed: int
    duration_ms: int
    fresh: bool

    @property
    def ok(self) -> bool:
        return self.result is not None


# ── synthetic backend ────────────────────────────────────────────────────


def _clone_shape(node: Node) -> Node:
    return Node(
        name=node.name,
        children=[_clone_shape(c) for c in node.children],
        length=node.length,
        support=None,
    )


@dataclass(frozen=True)
class SyntheticModel:
    """Deterministic stand-in for alignment + inference.

    A fixed set of "noisy" genes degrades every branch support linearly:
    with ``c`` noisy genes included, each internal edge gets
    ``clamp(base - penalty * c, 0, 100)``, and once ``c`` exceeds
    ``flip_threshold`` the inferred topology switches to ``alt_tree``.
    Per-edge overrides allow different bases/penalties per bipartition.
    """

    n_genes: int
    noisy: frozenset[int]
    true_tree: Tree
    alt_tree: Tree
    base_support: int = 98
    penalty: int = 2
    flip_threshold: int = 1
    base_overrides: Mapping[Bipartition, int] = field(default_factory=dict)
    penalty_overrides: Mapping[Bipartition, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_genes < 1:
            raise ValueError("model needs at least one gene")
        bad = [i for i in self.noisy if not 0 <= i < self.n_genes]
        if bad:
            raise ValueError(f"noisy gene indices out of range: {bad}")
        if not 0 <= self.base_support <= 100:
            raise ValueError(f"base support out of range: {self.base_support}")
        if self.penalty < 0:
            raise ValueError("penalty must be >= 0")
        if self.flip_threshold < 0:
            raise ValueError("flip threshold must be >= 0")
        if self.true_tree.taxa != self.alt_tree.taxa:
            raise ValueError("true and alternative trees must share one taxon set")
        if len(self.true_tree.taxa) < 4:
            raise ValueError("model trees need >= 4 taxa to carry internal supports")

    @cached_property
    def topology_keys(self) -> tuple[str, str]:
        return topology_key(self.true_tree), topology_key(self.alt_tree)


def synthetic_evaluate(word: GeneWord, model: SyntheticModel) -> ScoredTree:
    """Pure function of (word, model); no randomness anywhere."""
    if word.n != model.n_genes:
        raise ValueError(f"word length {word.n} != model gene count {model.n_genes}")
    c = sum(1 for i in model.noisy if word.bit(i))
    flipped = c > model.flip_threshold
    shape = model.alt_tree if flipped else model.true_tree
    root = _clone_shape(shape.root)
    tree = Tree(root)
    taxa = tree.taxa

    def leaves_below(node: Node) -> frozenset[str]:
        if node.is_leaf:
            return frozenset((node.name,))
        return frozenset().union(*(leaves_below(c) for c in node.children))

    def assign(node: Node) -> None:
        for child in node.children:
            if child.is_leaf:
                continue
            leaves = leaves_below(child)
            base, pen = model.base_support, model.penalty
            if 2 <= len(leaves) <= len(taxa) - 2:
                split = Bipartition(leaves, taxa)
                base = model.base_overrides.get(split, base)
                pen = model.penalty_overrides.get(split, pen)
            child.support = max(0, min(100, base - pen * c))
            assign(child)

    assign(root)
    b = lowest_support(tree)
    score = fitness(b, word.gene_rate())
    topo = model.topology_keys[1] if flipped else model.topology_keys[0]
    return ScoredTree(word=word, tree=tree, score=score, topology=topo)


class SyntheticEvaluator:
    """Backend adapter around a SyntheticModel."""

    deterministic = True

    def __init__(self, model: SyntheticModel, seed: int = 0):
        self.model = model
        self.seed = seed

    @property
    def n_genes(self) -> int:
        return self.model.n_genes

    def evaluate(self, word: GeneWord) -> ScoredTree:
        return synthetic_evaluate(word, self.model)

    def validate(self) -> None:
        pass


# ── FASTA / supermatrix tooling ──────────────────────────────────────────


def read_fasta(path: str | Path) -> list[tuple[str, str]]:
    """Parse a FASTA file into (taxon, sequence) pairs, order preserved."""
    entries: list[tuple[str, list[str]]] = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            name = line[1:].strip()
            if not name:
                raise InputError(f"{path}: empty FASTA header")
            entries.append((name, []))
        else:
            if not entries:
                raise InputError(f"{path}: sequence data before any '>' header")
            entries[-1][1].append(line)
    if not entries:
        raise InputError(f"{path}: no sequences")
    return [(name, "".join(chunks)) for name, chunks in entries]


def write_fasta(path: str | Path, rows: Sequence[tuple[str, str]]) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for name, seq in rows:
            handle.write(f">{name}\n{seq}\n")


def concat_alignment(
    word: GeneWord, gene_files: Sequence[str | Path]
) -> list[tuple[str, str]]:
    """Concatenate the selected genes' aligned sequences taxon by taxon.

    ``gene_files[i]`` is the alignment of gene i.  All files must carry the
    same taxa and be internally aligned (equal row lengths); taxa order of
    the output follows the first selected file.
    """
    if len(gene_files) != word.n:
        raise InputError(f"{len(gene_files)} gene files for a word of length {word.n}")
    selected = word.ones()
    if not selected:
        raise InputError("no genes selected")

    order: list[str] = []
    parts: dict[str, list[str]] = {}
    taxa_set: Optional[set[str]] = None
    for gene_index in selected:
        path = gene_files[gene_index]
        rows = read_fasta(path)
        names = [name for name, _ in rows]
        if len(set(names)) != len(names):
            raise InputError(f"{path}: duplicate taxon in alignment")
        lengths = {len(seq) for _, seq in rows}
        if len(lengths) != 1:
            raise InputError(f"{path}: ragged alignment rows (lengths {sorted(lengths)})")
        if taxa_set is None:
            taxa_set = set(names)
            order = names
            parts = {name: [] for name in names}
        elif set(names) != taxa_set:
            missing = sorted(taxa_set ^ set(names))
            raise InputError(f"{path}: taxa set mismatch ({', '.join(missing)})")
        by_name = dict(rows)
        for name in order:
            parts[name].append(by_name[name])
    return [(name, "".join(parts[name])) for name in order]


# ── external backend ─────────────────────────────────────────────────────

_PLACEHOLDERS = ("{input}", "{output}", "{seed}", "{workdir}")


def command_argv(template: str, substitutions: Mapping[str, str]) -> list[str]:
    """Split the template into an argument vector, then substitute.

    Splitting happens before substitution so values containing spaces stay
    single arguments; the command is executed without any shell.
    """
    tokens = shlex.split(template)
    if not tokens:
        raise InputError("empty command template")
    out = []
    for token in tokens:
        for key, value in substitutions.items():
            token = token.replace(key, value)
        out.append(token)
    return out


@dataclass
class EvaluatorConfig:
    """External-tool configuration: gene order, alignments, command templates."""

    genes: tuple[str, ...]
    alignment_paths: Mapping[str, Path]
    infer_template: str
    align_template: Optional[str] = None
    workdir: Path = Path("phylopt_work")
    timeout: float = 3600.0
    seed: int = 0

    def __post_init__(self):
        if not self.genes:
            raise InputError("gene list is empty")
        if list(self.genes) != sorted(self.genes):
            raise InputError("gene list must be in lexicographic order")
        missing = [g for g in self.genes if g not in self.alignment_paths]
        if missing:
            raise InputError(f"no alignment path for gene(s): {', '.join(missing)}")
        for ph in ("{input}", "{output}"):
            if ph not in self.infer_template:
                raise InputError(f"inference template lacks {ph}")
        self.workdir = Path(self.workdir)

    @property
    def n_genes(self) -> int:
        return len(self.genes)

    def gene_files(self) -> list[Path]:
        return [Path(self.alignment_paths[g]) for g in self.genes]

    def validate(self) -> None:
        """Check every alignment exists and all carry one common taxa set."""
        taxa: Optional[set[str]] = None
        first: Optional[Path] = None
        for gene in self.genes:
            path = Path(self.alignment_paths[gene])
            if not path.is_file():
                raise InputError(f"alignment for gene {gene!r} not found: {path}")
            names = {name for name, _ in read_fasta(path)}
            if taxa is None:
                taxa, first = names, path
            elif names != taxa:
                raise InputError(f"{path}: taxa differ from {first}")


class ExternalEvaluator:
    """Runs the (optional) alignment and the inference command per word.

    Each call works in its own scratch subdirectory so concurrent
    evaluations never collide.
    """

    deterministic = False

    def __init__(self, config: EvaluatorConfig):
        self.config = config
        self.seed = config.seed

    @property
    def n_genes(self) -> int:
        return self.config.n_genes

    def validate(self) -> None:
        self.config.validate()

    def _scratch(self, word: GeneWord) -> Path:
        digest = hashlib.sha1(str(word).encode("ascii")).hexdigest()[:16]
        scratch = Path(self.config.workdir) / f"eval_{digest}"
        if scratch.exists():
            for leftover in sorted(scratch.rglob("*"), reverse=True):
                leftover.unlink() if leftover.is_file() else leftover.rmdir()
        scratch.mkdir(parents=True, exist_ok=True)
        return scratch

    def _run(self, argv: list[str], word: GeneWord) -> None:
        try:
            proc = subprocess.run(
                argv,
                capture_output=True,
                text=True,
                timeout=self.config.timeout,
                check=False,
            )
        except subprocess.TimeoutExpired:
            raise EvaluationError(word, f"command timed out after {self.config.timeout}s: {argv[0]}")
        except OSError as exc:
            raise EvaluationError(word, f"could not run {argv[0]}: {exc}")
        if proc.returncode != 0:
            tail = (proc.stderr or proc.stdout or "").strip()[-500:]
            raise EvaluationError(word, f"{argv[0]} exited {proc.returncode}: {tail}")

    def _align(self, scratch: Path, gene: str, source: Path, word: GeneWord) -> Path:
        aligned = scratch / f"{gene}.aligned.fasta"
        argv = command_argv(
            self.config.align_template,
            {
                "{input}": str(source),
                "{output}": str(aligned),
                "{seed}": str(self.config.seed),
                "{workdir}": str(scratch),
            },
        )
        self._run(argv, word)
        if not aligned.is_file():
            raise EvaluationError(word, f"aligner produced no output for gene {gene}")
        return aligned

    def evaluate(self, word: GeneWord) -> ScoredTree:
        cfg = self.config
        if word.n != cfg.n_genes:
            raise ValueError(f"word length {word.n} != gene count {cfg.n_genes}")
        scratch = self._scratch(word)
        files = cfg.gene_files()
        if cfg.align_template is not None:
            files = list(files)
            for i in word.ones():
                files[i] = self._align(scratch, cfg.genes[i], files[i], word)
        try:
            rows = concat_alignment(word, files)
        except InputError as exc:
            raise EvaluationError(word, str(exc))
        supermatrix = scratch / "supermatrix.fasta"
        write_fasta(supermatrix, rows)
        out_tree = scratch / "inferred.nwk"
        argv = command_argv(
            cfg.infer_template,
            {
                "{input}": str(supermatrix),
                "{output}": str(out_tree),
                "{seed}": str(cfg.seed),
                "{workdir}": str(scratch),
            },
        )
        self._run(argv, word)
        if not out_tree.is_file():
            raise EvaluationError(word, "inference produced no output tree")
        try:
            tree = parse_newick(out_tree.read_text(encoding="utf-8").strip())
            b = lowest_support(tree)
        except ValueError as exc:
            raise EvaluationError(word, f"unusable inference output: {exc}")
        score = fitness(b, word.gene_rate())
        return ScoredTree(word=word, tree=tree, score=score, topology=topology_key(tree))


# ── caching wrapper ──────────────────────────────────────────────────────


class CachingEvaluator:
    """Single-flight cache in front of a backend.

    Concurrent requests for one word trigger exactly one backend call;
    failures are cached too, so a word that failed is never retried (the
    pipeline journals it once and moves on).
    """

    def __init__(self, backend):
        self.backend = backend
        self._lock = threading.Lock()
        self._done: dict[GeneWord, EvalOutcome] = {}
        self._inflight: dict[GeneWord, threading.Event] = {}

    def __len__(self) -> int:
        return len(self._done)

    def known(self, word: GeneWord) -> bool:
        with self._lock:
            return word in self._done

    def cached(self, word: GeneWord) -> Optional[EvalOutcome]:
        with self._lock:
            return self._done.get(word)

    def seed_from(self, outcome: EvalOutcome) -> None:
        """Preload a cache entry (journal replay on resume)."""
        with self._lock:
            self._done[outcome.word] = outcome

    def evaluate(self, word: GeneWord) -> EvalOutcome:
        while True:
            with self._lock:
                hit = self._done.get(word)
                if hit is not None:
                    return EvalOutcome(
                        word=word,
                        result=hit.result,
                        error=hit.error,
                        seed=hit.seed,
                        duration_ms=hit.duration_ms,
                        fresh=False,
                    )
                waiter = self._inflight.get(word)
                if waiter is None:
                    self._inflight[word] = threading.Event()
                    break
            waiter.wait()

        start = time.monotonic()
        seed = getattr(self.backend, "seed", 0)
        try:
            try:
                result = self.backend.evaluate(word)
                error = None
            except EvaluationError as exc:
                result = None
                error = exc.diagnostics
            duration_ms = (
                0
                if getattr(self.backend, "deterministic", False)
                else int((time.monotonic() - start) * 1000)
            )
            outcome = EvalOutcome(
                word=word, result=result, error=error, seed=seed, duration_ms=duration_ms, fresh=True
            )
            with self._lock:
                self._done[word] = outcome
            return outcome
        finally:
            # Wake waiters even on unexpected exceptions so nobody deadlocks.
            with self._lock:
                self._inflight.pop(word).set()


def evaluate_many(
    cache: CachingEvaluator,
    words: Sequence[GeneWord],
    submit: Optional[Callable] = None,
) -> list[EvalOutcome]:
    """Evaluate a batch, preserving request order in the result list."""
    if submit is None:
        return [cache.evaluate(w) for w in words]
    futures = [submit(cache.evaluate, w) for w in words]
    return [f.result() for f in futures]
