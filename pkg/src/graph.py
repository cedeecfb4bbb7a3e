"""
Computation Graph Module

Loads annotated DNN computation graphs (operators carrying FLOPs, bytes and
sparsity coefficients) and linearizes them into a deterministic topological
order, which is the sequence the partitioner walks.
"""
import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]


class GraphError(ValueError):
    """Base class for graph loading and validation failures"""


class GraphParseError(GraphError):
    pass


class CycleError(GraphError):
    pass


class DanglingEdgeError(GraphError):
    pass


class GraphValidationError(GraphError):
    pass


class UndefinedIntensityError(GraphError):
    pass


class TraceIndexError(GraphError, IndexError):
    pass


class OperatorKind(str, Enum):
    """Operator class; metadata only, never used by the models"""
    CONV = "conv"
    LINEAR = "linear"
    ACTIVATION = "activation"
    NORMALIZATION = "normalization"
    ATTENTION = "attention"
    POOLING = "pooling"
    OTHER = "other"


@dataclass(frozen=True)
class Operator:
    """
    One graph node.

    w_comp is the theoretical workload in FLOPs and d_mem the data volume in
    bytes; s_comp / s_mem are the computational and storage sparsity
    coefficients.
    """
    id: str
    kind: OperatorKind
    w_comp: float
    d_mem: float
    s_comp: float = 0.0
    s_mem: float = 0.0
    structured: bool = False

    def __post_init__(self):
        for field_name in ("s_comp", "s_mem"):
            value = getattr(self, field_name)
            if not 0.0 <= value <= 1.0:
                raise GraphValidationError(
                    f"operator '{self.id}': {field_name}={value} outside [0, 1]")
        if not (math.isfinite(self.w_comp) and math.isfinite(self.d_mem)):
            raise GraphValidationError(
                f"operator '{self.id}': w_comp and d_mem must be finite")
        if self.w_comp < 0 or self.d_mem < 0:
            raise GraphValidationError(
                f"operator '{self.id}': w_comp and d_mem must be >= 0")
        if self.w_comp == 0 and self.d_mem == 0:
            raise GraphValidationError(
                f"operator '{self.id}': w_comp and d_mem are both zero")
        if self.structured and self.s_mem > self.s_comp:
            raise GraphValidationError(
                f"operator '{self.id}': structured s_mem={self.s_mem} "
                f"exceeds s_comp={self.s_comp}")

    @property
    def effective_work(self) -> float:
        return self.w_comp * (1.0 - self.s_comp)

    @property
    def effective_bytes(self) -> float:
        return self.d_mem * (1.0 - self.s_mem)


@dataclass(frozen=True)
class ComputationGraph:
    """Validated DAG; `operators` is stored in topological order"""
    name: str
    operators: Tuple[Operator, ...]
    edges: Tuple[Tuple[str, str], ...] = ()

    def __len__(self) -> int:
        return len(self.operators)

    def operator(self, op_id: str) -> Operator:
        for op in self.operators:
            if op.id == op_id:
                return op
        raise KeyError(op_id)

    @property
    def op_ids(self) -> List[str]:
        return [op.id for op in self.operators]

    @property
    def total_flops(self) -> float:
        return float(sum(op.w_comp for op in self.operators))

    @property
    def total_bytes(self) -> float:
        return float(sum(op.d_mem for op in self.operators))


@dataclass(frozen=True)
class SparsityTrace:
    """One record per input sample: operator id -> (s_comp, s_mem)"""
    records: Tuple[Mapping[str, Tuple[float, float]], ...]

    def __len__(self) -> int:
        return len(self.records)


def _as_digraph(operators: Sequence[Operator],
                edges: Sequence[Tuple[str, str]]) -> nx.DiGraph:
    dag = nx.DiGraph()
    dag.add_nodes_from(op.id for op in operators)
    known = set(dag.nodes)
    for src, dst in edges:
        for endpoint in (src, dst):
            if endpoint not in known:
                raise DanglingEdgeError(
                    f"edge ({src}, {dst}) references unknown operator '{endpoint}'")
        dag.add_edge(src, dst)
    return dag


def topo_order(graph: ComputationGraph) -> List[Operator]:
    """
    Deterministic topological order, ties broken by stored operator order

    Args:
        graph: Validated graph

    Returns:
        Operators in execution order
    """
    return _topo_sort(graph.operators, graph.edges)


def _topo_sort(operators: Sequence[Operator],
               edges: Sequence[Tuple[str, str]]) -> List[Operator]:
    position = {op.id: i for i, op in enumerate(operators)}
    by_id = {op.id: op for op in operators}
    dag = _as_digraph(operators, edges)

    try:
        cycle = nx.find_cycle(dag)
    except nx.NetworkXNoCycle:
        cycle = None
    if cycle:
        members = " -> ".join(src for src, _ in cycle)
        raise CycleError(f"cycle detected through operator '{cycle[0][0]}': {members}")

    ordered = nx.lexicographical_topological_sort(dag, key=lambda n: position[n])
    return [by_id[op_id] for op_id in ordered]


def _operator_from_dict(entry: Mapping, index: int) -> Operator:
    if not isinstance(entry, Mapping):
        raise GraphParseError(f"operator #{index} is not an object")
    op_id = entry.get("id")
    if not isinstance(op_id, str) or not op_id:
        raise GraphParseError(f"operator #{index} has no string 'id'")

    try:
        kind = OperatorKind(entry.get("kind", "other"))
    except ValueError:
        raise GraphParseError(f"operator '{op_id}': unknown kind '{entry.get('kind')}'")

    try:
        w_comp = float(entry["w_comp"])
        d_mem = float(entry["d_mem"])
        s_comp = float(entry.get("s_comp", 0.0))
        structured = bool(entry.get("structured", False))
        if "s_mem" in entry and entry["s_mem"] is not None:
            s_mem = float(entry["s_mem"])
        else:
            # Structured sparsity skips whole tiles; random zeros save no bandwidth
            s_mem = s_comp if structured else 0.0
    except KeyError as e:
        raise GraphParseError(f"operator '{op_id}': missing field {e}")
    except (TypeError, ValueError) as e:
        raise GraphParseError(f"operator '{op_id}': bad numeric field ({e})")

    return Operator(id=op_id, kind=kind, w_comp=w_comp, d_mem=d_mem,
                    s_comp=s_comp, s_mem=s_mem, structured=structured)


def graph_from_dict(data: Mapping, source: str = "<dict>") -> ComputationGraph:
    """
    Build and validate a graph from its JSON object form

    Raises:
        GraphParseError, DanglingEdgeError, CycleError, GraphValidationError
    """
    if not isinstance(data, Mapping) or "operators" not in data:
        raise GraphParseError(f"{source}: expected an object with 'operators'")

    raw_ops = data["operators"]
    if not isinstance(raw_ops, list) or not raw_ops:
        raise GraphParseError(f"{source}: 'operators' must be a nonempty list")

    operators = [_operator_from_dict(entry, i) for i, entry in enumerate(raw_ops)]
    seen: Dict[str, int] = {}
    for op in operators:
        if op.id in seen:
            raise GraphValidationError(f"{source}: duplicate operator id '{op.id}'")
        seen[op.id] = 1

    raw_edges = data.get("edges", [])
    if not isinstance(raw_edges, list):
        raise GraphParseError(f"{source}: 'edges' must be a list of [from, to] pairs")
    edges: List[Tuple[str, str]] = []
    for pair in raw_edges:
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise GraphParseError(f"{source}: edge {pair!r} is not a [from, to] pair")
        edges.append((str(pair[0]), str(pair[1])))

    ordered = _topo_sort(operators, edges)
    name = str(data.get("name") or Path(source).stem)
    return ComputationGraph(name=name, operators=tuple(ordered), edges=tuple(edges))


def load_graph(path: PathLike) -> ComputationGraph:
    """
    Load a graph file and return it in topological order

    Args:
        path: JSON graph file

    Returns:
        Validated ComputationGraph
    """
    path = Path(path)
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise GraphParseError(f"graph file not found: {path}")
    except json.JSONDecodeError as e:
        raise GraphParseError(f"{path}: invalid JSON ({e})")

    graph = graph_from_dict(data, source=str(path))
    logger.debug("Graph loaded", graph=graph.name, operators=len(graph),
                 edges=len(graph.edges), total_gflops=graph.total_flops / 1e9,
                 total_mb=graph.total_bytes / 1e6)
    return graph


def graph_to_dict(graph: ComputationGraph) -> Dict:
    return {
        "name": graph.name,
        "operators": [
            {
                "id": op.id,
                "kind": op.kind.value,
                "w_comp": op.w_comp,
                "d_mem": op.d_mem,
                "s_comp": op.s_comp,
                "s_mem": op.s_mem,
                "structured": op.structured,
            }
            for op in graph.operators
        ],
        "edges": [list(e) for e in graph.edges],
    }


def save_graph(graph: ComputationGraph, path: PathLike):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(graph_to_dict(graph), f, indent=2)


def trace_from_list(data: Sequence, source: str = "<list>") -> SparsityTrace:
    if not isinstance(data, list):
        raise GraphParseError(f"{source}: a sparsity trace is a JSON array of records")

    records = []
    for i, record in enumerate(data):
        if not isinstance(record, Mapping):
            raise GraphParseError(f"{source}: record #{i} is not an object")
        parsed = {}
        for op_id, pair in record.items():
            try:
                s_comp, s_mem = (float(v) for v in pair)
            except (TypeError, ValueError):
                raise GraphParseError(
                    f"{source}: record #{i}, operator '{op_id}': expected [s_comp, s_mem]")
            for v in (s_comp, s_mem):
                if not 0.0 <= v <= 1.0:
                    raise GraphValidationError(
                        f"{source}: record #{i}, operator '{op_id}': {v} outside [0, 1]")
            parsed[op_id] = (s_comp, s_mem)
        records.append(parsed)
    return SparsityTrace(records=tuple(records))


def load_trace(path: PathLike) -> SparsityTrace:
    path = Path(path)
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise GraphParseError(f"trace file not found: {path}")
    except json.JSONDecodeError as e:
        raise GraphParseError(f"{path}: invalid JSON ({e})")
    return trace_from_list(data, source=str(path))


def apply_trace(graph: ComputationGraph, trace: SparsityTrace,
                sample_index: int) -> ComputationGraph:
    """
    Copy of the graph with one sample's sparsities substituted

    Args:
        graph: Graph carrying static sparsity
        trace: Per-sample overrides
        sample_index: Record to apply

    Returns:
        New graph; operators absent from the record keep their values
    """
    if not 0 <= sample_index < len(trace):
        raise TraceIndexError(
            f"sample index {sample_index} out of range for trace of length {len(trace)}")

    record = trace.records[sample_index]
    known = set(graph.op_ids)
    for op_id in record:
        if op_id not in known:
            raise GraphValidationError(
                f"trace record #{sample_index} references unknown operator '{op_id}'")

    operators = tuple(
        replace(op, s_comp=record[op.id][0], s_mem=record[op.id][1])
        if op.id in record else op
        for op in graph.operators
    )
    return replace(graph, operators=operators)


def arithmetic_intensity(op: Operator) -> float:
    """Effective FLOPs per byte after both sparsities are applied"""
    effective_bytes = op.effective_bytes
    if effective_bytes <= 0:
        raise UndefinedIntensityError(
            f"operator '{op.id}': effective data volume is zero")
    return op.effective_work / effective_bytes


def random_graph(rng: np.random.Generator, n_ops: int,
                 name: Optional[str] = None) -> ComputationGraph:
    """
    Synthetic chain with occasional skip edges

    Mixes dense compute-bound operators with sparse memory-bound ones so that
    optimal triplets vary along the chain. Used by the property checks.

    Args:
        rng: Seeded numpy generator
        n_ops: Number of operators
        name: Graph name (defaults to "random_<n_ops>")
    """
    if n_ops < 1:
        raise ValueError("n_ops must be >= 1")

    operators = []
    for i in range(n_ops):
        if rng.random() < 0.5:
            w = float(rng.uniform(5e6, 4e8))
            operators.append(Operator(
                id=f"op{i:03d}", kind=OperatorKind.CONV, w_comp=w,
                d_mem=w / float(rng.uniform(20.0, 80.0)),
                s_comp=float(rng.choice([0.0, 0.1, 0.3]))))
        else:
            d = float(rng.uniform(1e6, 2e8))
            s = float(rng.uniform(0.0, 0.9))
            operators.append(Operator(
                id=f"op{i:03d}", kind=OperatorKind.ACTIVATION,
                w_comp=d / float(rng.uniform(4.0, 16.0)), d_mem=d,
                s_comp=s, s_mem=s, structured=True))

    edges = [(operators[i].id, operators[i + 1].id) for i in range(n_ops - 1)]
    edges += [(operators[i].id, operators[i + 2].id)
              for i in range(n_ops - 2) if rng.random() < 0.2]
    return ComputationGraph(name=name or f"random_{n_ops}",
                            operators=tuple(operators), edges=tuple(edges))
