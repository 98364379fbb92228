"""Cell-based architecture search spaces and the continuous-to-discrete mapping.

A search space is a shared operation set plus one or more cells.  Each cell is
a small DAG whose searchable edges carry one operation each.  The continuous
parameterization assigns one real number per (edge, operation) pair; softmax
over each edge's row turns that into a distribution, and the mapping rules
collapse the distribution to a discrete genotype.

Two cell styles exist:

* edge style (no ``intermediate_nodes``): every listed edge is part of the
  final architecture and gets the argmax operation of its row.
* selection style (``intermediate_nodes`` set): each intermediate node keeps
  exactly two incoming edges, ranked by the edge's best non-zero-op softmax
  weight, and each kept edge gets the argmax over non-zero operations.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field

import numpy as np


class SpaceError(ValueError):
    """Invalid space definition, genotype, vector, or canonical key."""


# characters with structural meaning inside canonical keys; op names must
# avoid them so keys stay injective and parseable
_KEY_DELIMS = set("|[]();:,")

_SEGMENT_RE = re.compile(r"([A-Za-z0-9_]+)\[([^\]]*)\]")
_PAIR_RE = re.compile(r"\((\d+),([^,()]+)\)")


@dataclass(frozen=True)
class OperationSet:
    """Shared candidate operations; ``zero_index`` marks the no-op if present."""

    names: tuple[str, ...]
    zero_index: int | None = None

    def __post_init__(self) -> None:
        if len(self.names) == 0:
            raise SpaceError("operation set is empty")
        if len(set(self.names)) != len(self.names):
            raise SpaceError("operation names are not unique")
        for name in self.names:
            if not name:
                raise SpaceError("empty operation name")
            bad = _KEY_DELIMS.intersection(name)
            if bad:
                raise SpaceError(
                    f"operation name {name!r} contains reserved characters {sorted(bad)}"
                )
        if self.zero_index is not None and not (0 <= self.zero_index < len(self.names)):
            raise SpaceError(f"zero_index {self.zero_index} out of range")

    def __len__(self) -> int:
        return len(self.names)

    @property
    def non_zero_indices(self) -> tuple[int, ...]:
        if self.zero_index is None:
            return tuple(range(len(self.names)))
        return tuple(i for i in range(len(self.names)) if i != self.zero_index)


@dataclass(frozen=True)
class CellSpec:
    """One cell DAG: ``node_count`` nodes, searchable ``edges`` as (src, dst).

    ``intermediate_nodes`` non-empty switches the cell to selection style.
    Edges are normalized to canonical order: sorted by (dst, src) ascending,
    which keeps each node's incoming candidates contiguous.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    intermediate_nodes: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.node_count < 2:
            raise SpaceError("cell needs at least two nodes")
        if len(self.edges) == 0:
            raise SpaceError("cell has no searchable edges")
        norm = tuple(sorted(((int(s), int(d)) for s, d in self.edges), key=lambda e: (e[1], e[0])))
        object.__setattr__(self, "edges", norm)
        seen: set[tuple[int, int]] = set()
        for src, dst in self.edges:
            if not (0 <= src < self.node_count and 0 <= dst < self.node_count):
                raise SpaceError(f"edge ({src},{dst}) references a missing node")
            if src >= dst:
                raise SpaceError(f"edge ({src},{dst}) is not forward (src < dst required)")
            if (src, dst) in seen:
                raise SpaceError(f"duplicate edge ({src},{dst})")
            seen.add((src, dst))
        inter = tuple(sorted(int(n) for n in self.intermediate_nodes))
        object.__setattr__(self, "intermediate_nodes", inter)
        for node in inter:
            if not (0 <= node < self.node_count):
                raise SpaceError(f"intermediate node {node} out of range")
            if len(self.incoming(node)) < 2:
                raise SpaceError(
                    f"intermediate node {node} has fewer than two candidate in-edges"
                )

    @property
    def is_selection(self) -> bool:
        return len(self.intermediate_nodes) > 0

    def incoming(self, node: int) -> tuple[int, ...]:
        """Local edge indices (canonical order) whose destination is ``node``."""
        return tuple(i for i, (_, dst) in enumerate(self.edges) if dst == node)


@dataclass(frozen=True)
class SearchSpaceSpec:
    """A full space: kind tag, shared operation set, and cells."""

    kind: str
    ops: OperationSet
    cells: tuple[CellSpec, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("s1", "s2", "custom"):
            raise SpaceError(f"unknown space kind {self.kind!r}")
        if len(self.cells) == 0:
            raise SpaceError("space has no cells")
        for cell in self.cells:
            if cell.is_selection and len(self.ops.non_zero_indices) == 0:
                raise SpaceError("selection cell needs at least one non-zero operation")
        if self.kind == "s1":
            if len(self.cells) != 2 or any(len(c.edges) != 14 for c in self.cells):
                raise SpaceError("s1 requires two cells with 14 edges each")
            if any(not c.is_selection for c in self.cells):
                raise SpaceError("s1 cells are selection style")
        if self.kind == "s2":
            if len(self.cells) != 1 or len(self.cells[0].edges) != 6:
                raise SpaceError("s2 requires one cell with 6 edges")
            if self.cells[0].is_selection:
                raise SpaceError("s2 cell is edge style")

    def cell_name(self, index: int) -> str:
        if self.kind == "s1":
            return ("normal", "reduction")[index]
        return f"cell{index}"


@dataclass(frozen=True)
class ArchParam:
    """Continuous architecture parameters: one real per (edge, op) pair."""

    values: np.ndarray

    def __post_init__(self) -> None:
        vec = np.asarray(self.values, dtype=float)
        if vec.ndim != 1:
            raise SpaceError("parameter vector must be one-dimensional")
        if not np.all(np.isfinite(vec)):
            raise SpaceError("parameter vector has non-finite entries")
        vec = vec.copy()
        vec.setflags(write=False)
        object.__setattr__(self, "values", vec)


@dataclass(frozen=True)
class Genotype:
    """Discrete architecture.

    One entry per cell, in spec order.  Edge-style cells carry a tuple of op
    indices (canonical edge order).  Selection-style cells carry, per
    intermediate node ascending, a pair ((src, op), (src, op)) sorted by src.
    """

    cells: tuple[tuple, ...]


def dimension(spec: SearchSpaceSpec) -> int:
    """Vector length: total searchable edges times operation count."""
    return sum(len(cell.edges) for cell in spec.cells) * len(spec.ops)


def genotype_count(spec: SearchSpaceSpec) -> int:
    """Number of distinct genotypes the space admits."""
    total = 1
    k = len(spec.ops)
    nz = len(spec.ops.non_zero_indices)
    for cell in spec.cells:
        if cell.is_selection:
            for node in cell.intermediate_nodes:
                m = len(cell.incoming(node))
                total *= (m * (m - 1) // 2) * nz * nz
        else:
            total *= k ** len(cell.edges)
    return total


def _as_vector(alpha, spec: SearchSpaceSpec) -> np.ndarray:
    vec = alpha.values if isinstance(alpha, ArchParam) else np.asarray(alpha, dtype=float)
    vec = np.asarray(vec, dtype=float)
    if vec.ndim != 1 or vec.shape[0] != dimension(spec):
        raise SpaceError(
            f"parameter vector has length {vec.size}, space needs {dimension(spec)}"
        )
    if not np.all(np.isfinite(vec)):
        raise SpaceError("parameter vector has non-finite entries")
    return vec


def softmax_rows(alpha, spec: SearchSpaceSpec) -> np.ndarray:
    """Per-edge softmax: rows (one per edge, canonical order) sum to one.

    Max-subtracted before exponentiation so large magnitudes cannot overflow.
    """
    vec = _as_vector(alpha, spec)
    rows = vec.reshape(-1, len(spec.ops))
    shifted = rows - rows.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=1, keepdims=True)


def map_to_genotype(alpha, spec: SearchSpaceSpec) -> Genotype:
    """Collapse continuous parameters to a discrete genotype.

    Edge-style cells: argmax op per edge (ties -> lowest op index).
    Selection-style cells: per intermediate node, rank candidate in-edges by
    their best non-zero-op weight, keep the top two (ties -> canonical edge
    order), then give each kept edge its best non-zero op (ties -> lowest
    index).
    """
    weights = softmax_rows(alpha, spec)
    out: list[tuple] = []
    row = 0
    for cell in spec.cells:
        block = weights[row : row + len(cell.edges)]
        row += len(cell.edges)
        if not cell.is_selection:
            out.append(tuple(int(np.argmax(block[i])) for i in range(len(cell.edges))))
            continue
        nz = list(spec.ops.non_zero_indices)
        node_choices = []
        for node in cell.intermediate_nodes:
            cand = cell.incoming(node)
            strength = {e: float(np.max(block[e, nz])) for e in cand}
            kept = sorted(cand, key=lambda e: (-strength[e], e))[:2]
            pairs = []
            for e in kept:
                op = nz[int(np.argmax(block[e, nz]))]
                pairs.append((cell.edges[e][0], op))
            pairs.sort(key=lambda p: p[0])
            node_choices.append(tuple(pairs))
        out.append(tuple(node_choices))
    return Genotype(tuple(out))


def validate_genotype(genotype: Genotype, spec: SearchSpaceSpec) -> None:
    """Raise SpaceError unless ``genotype`` is well-formed for ``spec``."""
    if not isinstance(genotype, Genotype) or len(genotype.cells) != len(spec.cells):
        raise SpaceError("genotype cell count does not match space")
    k = len(spec.ops)
    for cell, choice in zip(spec.cells, genotype.cells):
        if not cell.is_selection:
            if len(choice) != len(cell.edges):
                raise SpaceError("edge-style cell choice length mismatch")
            for op in choice:
                if not (0 <= int(op) < k):
                    raise SpaceError(f"operation index {op} out of range")
            continue
        if len(choice) != len(cell.intermediate_nodes):
            raise SpaceError("selection cell node count mismatch")
        for node, pairs in zip(cell.intermediate_nodes, choice):
            if len(pairs) != 2:
                raise SpaceError(f"node {node} must keep exactly two edges")
            srcs = [int(src) for src, _ in pairs]
            if srcs[0] >= srcs[1]:
                raise SpaceError(f"node {node} pairs must be sorted by distinct source")
            valid_srcs = {cell.edges[e][0] for e in cell.incoming(node)}
            for src, op in pairs:
                if int(src) not in valid_srcs:
                    raise SpaceError(f"node {node} has no candidate edge from {src}")
                if not (0 <= int(op) < k):
                    raise SpaceError(f"operation index {op} out of range")


def discretize(genotype: Genotype, spec: SearchSpaceSpec) -> np.ndarray:
    """One-hot vector of the genotype in the continuous layout (0.0 / 1.0)."""
    validate_genotype(genotype, spec)
    k = len(spec.ops)
    vec = np.zeros(dimension(spec))
    base = 0
    for cell, choice in zip(spec.cells, genotype.cells):
        if not cell.is_selection:
            for e, op in enumerate(choice):
                vec[base + e * k + int(op)] = 1.0
        else:
            for node, pairs in zip(cell.intermediate_nodes, choice):
                by_src = {cell.edges[e][0]: e for e in cell.incoming(node)}
                for src, op in pairs:
                    vec[base + by_src[int(src)] * k + int(op)] = 1.0
        base += len(cell.edges) * k
    return vec


def canonical_key(genotype: Genotype, spec: SearchSpaceSpec) -> str:
    """Injective, human-readable string form of a genotype.

    A space with a single edge-style cell uses the compact form: op names
    joined by "|" in canonical edge order.  Anything else concatenates
    "name[...]" segments per cell; selection cells list
    "node:(src,op)(src,op)" groups separated by ";".
    """
    validate_genotype(genotype, spec)
    names = spec.ops.names
    if len(spec.cells) == 1 and not spec.cells[0].is_selection:
        return "|".join(names[int(op)] for op in genotype.cells[0])
    parts = []
    for i, (cell, choice) in enumerate(zip(spec.cells, genotype.cells)):
        if not cell.is_selection:
            body = "|".join(names[int(op)] for op in choice)
        else:
            groups = []
            for node, pairs in zip(cell.intermediate_nodes, choice):
                pair_txt = "".join(f"({src},{names[int(op)]})" for src, op in pairs)
                groups.append(f"{node}:{pair_txt}")
            body = ";".join(groups)
        parts.append(f"{spec.cell_name(i)}[{body}]")
    return "".join(parts)


def parse_key(key: str, spec: SearchSpaceSpec) -> Genotype:
    """Inverse of canonical_key; raises SpaceError on any malformed input."""
    name_to_op = {name: i for i, name in enumerate(spec.ops.names)}

    def ops_from(body: str, cell: CellSpec) -> tuple[int, ...]:
        toks = body.split("|")
        if len(toks) != len(cell.edges):
            raise SpaceError(f"key lists {len(toks)} ops, cell has {len(cell.edges)} edges")
        out = []
        for tok in toks:
            if tok not in name_to_op:
                raise SpaceError(f"unknown operation name {tok!r}")
            out.append(name_to_op[tok])
        return tuple(out)

    if len(spec.cells) == 1 and not spec.cells[0].is_selection:
        geno = Genotype((ops_from(key, spec.cells[0]),))
        validate_genotype(geno, spec)
        return geno

    segments = _SEGMENT_RE.findall(key)
    if "".join(f"{n}[{b}]" for n, b in segments) != key:
        raise SpaceError(f"malformed key {key!r}")
    if len(segments) != len(spec.cells):
        raise SpaceError(f"key has {len(segments)} cell segments, space has {len(spec.cells)}")
    cells_out: list[tuple] = []
    for i, (cell, (seg_name, body)) in enumerate(zip(spec.cells, segments)):
        if seg_name != spec.cell_name(i):
            raise SpaceError(f"cell segment {seg_name!r} does not match {spec.cell_name(i)!r}")
        if not cell.is_selection:
            cells_out.append(ops_from(body, cell))
            continue
        groups = body.split(";") if body else []
        if len(groups) != len(cell.intermediate_nodes):
            raise SpaceError(f"key lists {len(groups)} nodes, cell has {len(cell.intermediate_nodes)}")
        node_choices = []
        for node, group in zip(cell.intermediate_nodes, groups):
            head, sep, rest = group.partition(":")
            if not sep or head != str(node):
                raise SpaceError(f"expected node {node} in segment {group!r}")
            pairs = _PAIR_RE.findall(rest)
            if "".join(f"({s},{o})" for s, o in pairs) != rest or len(pairs) != 2:
                raise SpaceError(f"malformed pair list {rest!r}")
            parsed = []
            for src_txt, op_name in pairs:
                if op_name not in name_to_op:
                    raise SpaceError(f"unknown operation name {op_name!r}")
                parsed.append((int(src_txt), name_to_op[op_name]))
            node_choices.append(tuple(parsed))
        cells_out.append(tuple(node_choices))
    geno = Genotype(tuple(cells_out))
    validate_genotype(geno, spec)
    return geno


def enumerate_genotypes(spec: SearchSpaceSpec):
    """Yield every genotype in canonical enumeration order."""
    k = len(spec.ops)
    nz = spec.ops.non_zero_indices

    def cell_options(cell: CellSpec):
        if not cell.is_selection:
            yield from itertools.product(range(k), repeat=len(cell.edges))
            return
        per_node = []
        for node in cell.intermediate_nodes:
            srcs = sorted(cell.edges[e][0] for e in cell.incoming(node))
            combos = []
            for a, b in itertools.combinations(srcs, 2):
                for op_a in nz:
                    for op_b in nz:
                        combos.append(((a, op_a), (b, op_b)))
            per_node.append(combos)
        yield from itertools.product(*per_node)

    for combo in itertools.product(*(cell_options(c) for c in spec.cells)):
        yield Genotype(tuple(combo))


def s1_space() -> SearchSpaceSpec:
    """Two selection-style cells, 7 nodes, 14 edges, 8 ops; dimension 224."""
    ops = OperationSet(
        names=(
            "none",
            "max_pool_3x3",
            "avg_pool_3x3",
            "skip_connect",
            "sep_conv_3x3",
            "sep_conv_5x5",
            "dil_conv_3x3",
            "dil_conv_5x5",
        ),
        zero_index=0,
    )
    edges = tuple((src, dst) for dst in (2, 3, 4, 5) for src in range(dst))
    cell = CellSpec(node_count=7, edges=edges, intermediate_nodes=(2, 3, 4, 5))
    return SearchSpaceSpec(kind="s1", ops=ops, cells=(cell, cell))


def s2_space() -> SearchSpaceSpec:
    """One edge-style cell, 4 nodes, all 6 forward edges, 5 ops; dimension 30."""
    ops = OperationSet(
        names=("none", "skip_connect", "conv_1x1", "conv_3x3", "avg_pool_3x3"),
        zero_index=0,
    )
    edges = tuple((src, dst) for dst in range(1, 4) for src in range(dst))
    cell = CellSpec(node_count=4, edges=edges)
    return SearchSpaceSpec(kind="s2", ops=ops, cells=(cell,))


def to_json_dict(spec: SearchSpaceSpec) -> dict:
    doc: dict = {"kind": spec.kind, "ops": list(spec.ops.names)}
    if spec.ops.zero_index is not None:
        doc["zero_op"] = spec.ops.names[spec.ops.zero_index]
    doc["cells"] = [
        {"nodes": cell.node_count, "edges": [list(e) for e in cell.edges]}
        for cell in spec.cells
    ]
    return doc


def from_json_dict(doc: dict) -> SearchSpaceSpec:
    try:
        kind = doc["kind"]
        op_names = tuple(doc["ops"])
        cell_docs = doc["cells"]
    except (KeyError, TypeError) as err:
        raise SpaceError(f"space document missing field: {err}") from err
    zero_index: int | None = None
    if "zero_op" in doc and doc["zero_op"] is not None:
        if doc["zero_op"] not in op_names:
            raise SpaceError(f"zero_op {doc['zero_op']!r} not in ops")
        zero_index = op_names.index(doc["zero_op"])
    ops = OperationSet(names=op_names, zero_index=zero_index)
    cells = []
    for cdoc in cell_docs:
        try:
            nodes = int(cdoc["nodes"])
            edges = tuple((int(s), int(d)) for s, d in cdoc["edges"])
        except (KeyError, TypeError, ValueError) as err:
            raise SpaceError(f"bad cell document: {err}") from err
        inter: tuple[int, ...] = ()
        if kind == "s1":
            inter = tuple(sorted({d for _, d in edges}))
        elif "intermediate_nodes" in cdoc:
            inter = tuple(int(n) for n in cdoc["intermediate_nodes"])
        cells.append(CellSpec(node_count=nodes, edges=edges, intermediate_nodes=inter))
    return SearchSpaceSpec(kind=kind, ops=ops, cells=tuple(cells))


def load_space(path) -> SearchSpaceSpec:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise SpaceError(f"space file is not valid JSON: {err}") from err
    return from_json_dict(doc)
