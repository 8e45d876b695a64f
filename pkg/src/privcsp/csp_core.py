"""Instance representations, value evaluation and structural predicates.

Variables take values in {-1, +1}. A constraint is either a general
predicate stored as an explicit truth table over its scope, or a parity
(XOR) constraint stored in compact sign form: the predicate
1/2 + (b/2) * prod(x_i for i in scope) which is satisfied exactly when
the scope product equals b.

Max-Cut admits two lossless views: a CspInstance of 2XOR constraints
with b = -1, and a WeightedGraph. Graph algorithms consume the graph
view; CSP algorithms the instance view.

All types are immutable after construction; operations are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

ARITY_CAP = 20

__all__ = [
    "ARITY_CAP",
    "ResourceCapError",
    "Constraint",
    "CspInstance",
    "WeightedGraph",
    "as_assignment",
    "eval_value",
    "cut_value",
    "associated_advantage",
    "g_value",
    "mu",
    "is_triangle_free",
    "degrees",
    "derivative_q",
    "lambda_j",
    "assignment_blocks",
    "compile_values",
    "all_values",
    "graph_to_instance",
    "instance_to_graph",
    "instance_to_json",
    "instance_from_json",
    "load_instance",
    "save_instance",
    "load_edge_list",
]


class ResourceCapError(RuntimeError):
    """An enumeration cap or retry budget was exceeded."""


def as_assignment(x: Sequence[int] | np.ndarray, n: int | None = None) -> np.ndarray:
    """Validates and converts x to an int8 vector of {-1, +1} entries."""
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError(f"assignment must be one-dimensional, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"assignment length {arr.shape[0]} != variable count {n}")
    if not np.all(np.abs(arr) == 1):
        raise ValueError("assignment entries must be -1 or +1")
    return arr.astype(np.int8)


@dataclass(frozen=True)
class Constraint:
    """A single constraint: ordered scope plus sign form or truth table.

    For sign form, ``b`` is +-1 and ``table`` is None. For a general
    predicate, ``table`` has exactly 2**arity 0/1 entries indexed by
    idx = sum((x[scope[t]] == +1) << t), i.e. scope position 0 is the
    least significant bit.
    """

    scope: tuple[int, ...]
    b: int | None = None
    table: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if len(set(self.scope)) != len(self.scope):
            raise ValueError(f"scope indices must be distinct: {self.scope}")
        if len(self.scope) == 0:
            raise ValueError("scope must be nonempty")
        if any(i < 0 for i in self.scope):
            raise ValueError(f"scope indices must be nonnegative: {self.scope}")
        if (self.b is None) == (self.table is None):
            raise ValueError("exactly one of b or table must be given")
        if self.b is not None and self.b not in (-1, 1):
            raise ValueError(f"sign b must be -1 or +1, got {self.b}")
        if self.table is not None:
            if self.arity > ARITY_CAP:
                raise ResourceCapError(
                    f"truth-table arity {self.arity} exceeds cap {ARITY_CAP}"
                )
            if len(self.table) != 2 ** self.arity:
                raise ValueError(
                    f"truth table length {len(self.table)} != 2^{self.arity}"
                )
            if any(v not in (0, 1) for v in self.table):
                raise ValueError("truth-table entries must be 0 or 1")

    @property
    def arity(self) -> int:
        return len(self.scope)

    @property
    def is_xor(self) -> bool:
        return self.b is not None

    def evaluate_local(self, values: Sequence[int]) -> int:
        """Returns P(values) in {0, 1} for values aligned with the scope."""
        if len(values) != self.arity:
            raise ValueError(f"expected {self.arity} values, got {len(values)}")
        if self.b is not None:
            prod = 1
            for v in values:
                prod *= v
            return int(prod == self.b)
        idx = 0
        for t, v in enumerate(values):
            if v == 1:
                idx |= 1 << t
        return self.table[idx]

    def evaluate(self, x: np.ndarray) -> int:
        """Returns P(x restricted to the scope) in {0, 1}."""
        return self.evaluate_local([int(x[i]) for i in self.scope])


@dataclass(frozen=True)
class CspInstance:
    """A multiset of constraints over n variables.

    kind is one of 'general', 'kxor' (every constraint in sign form) or
    'maxcut' (every constraint a 2XOR with b = -1).
    """

    n: int
    constraints: tuple[Constraint, ...]
    kind: str = "general"

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("variable count must be nonnegative")
        if self.kind not in ("general", "kxor", "maxcut"):
            raise ValueError(f"unknown kind {self.kind!r}")
        for c in self.constraints:
            if max(c.scope, default=-1) >= self.n:
                raise ValueError(f"scope {c.scope} out of range for n={self.n}")
            if self.kind == "kxor" and not c.is_xor:
                raise ValueError("kxor instances admit sign-form constraints only")
            if self.kind == "maxcut" and not (
                c.is_xor and c.arity == 2 and c.b == -1
            ):
                raise ValueError("maxcut constraints must be 2XOR with b = -1")

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def max_arity(self) -> int:
        return max((c.arity for c in self.constraints), default=0)

    def require_distinct_scopes(self) -> None:
        scopes = [tuple(sorted(c.scope)) for c in self.constraints]
        if len(set(scopes)) != len(scopes):
            raise ValueError("instance has duplicate scopes")


@dataclass(frozen=True)
class WeightedGraph:
    """An undirected multigraph with positive edge weights, no self-loops."""

    n: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("vertex count must be nonnegative")
        for u, v, w in self.edges:
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u},{v}) out of range for n={self.n}")
            if not w > 0:
                raise ValueError(f"edge weight must be positive, got {w}")

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def is_unweighted(self) -> bool:
        return all(w == 1 for _, _, w in self.edges)

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns (u, v, w) column arrays; empty arrays for no edges."""
        if not self.edges:
            return (
                np.empty(0, dtype=np.int64),
                np.empty(0, dtype=np.int64),
                np.empty(0, dtype=np.float64),
            )
        arr = np.asarray([(u, v, w) for u, v, w in self.edges], dtype=np.float64)
        return arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2]

    def degree_counts(self) -> np.ndarray:
        """Incident-edge counts per vertex."""
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v, _ in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def weighted_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.float64)
        for u, v, w in self.edges:
            deg[u] += w
            deg[v] += w
        return deg

    def adjacency_lists(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v, _ in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def has_triangle(self) -> bool:
        neigh = [set() for _ in range(self.n)]
        for u, v, _ in self.edges:
            neigh[u].add(v)
            neigh[v].add(u)
        for u, v, _ in self.edges:
            if neigh[u] & neigh[v]:
                return True
        return False


def eval_value(instance: CspInstance | WeightedGraph, x) -> float:
    """Number (or total weight) of satisfied constraints / cut edges."""
    if isinstance(instance, WeightedGraph):
        return cut_value(instance, x)
    xv = as_assignment(x, instance.n)
    return float(sum(c.evaluate(xv) for c in instance.constraints))


def cut_value(graph: WeightedGraph, sides) -> float:
    """Total weight of edges whose endpoints lie on opposite sides."""
    sv = as_assignment(sides, graph.n)
    if graph.m == 0:
        return 0.0
    u, v, w = graph.edge_arrays()
    return float(w[sv[u] != sv[v]].sum())


def associated_advantage(instance: CspInstance, x) -> float:
    """Mean centered constraint value: (value - mu * m) / m, computed exactly
    per constraint so value = (mu + advantage) * m holds."""
    if instance.m == 0:
        raise ValueError("advantage undefined for an empty instance")
    xv = as_assignment(x, instance.n)
    total = Fraction(0)
    for c in instance.constraints:
        total += c.evaluate(xv) - _mu_constraint_exact(c)
    return float(total / instance.m)


def g_value(instance: CspInstance, x) -> float:
    """Normalized parity sum (1/sqrt(m)) * sum_l b_l * prod_{i in scope_l} x_i."""
    if instance.kind not in ("kxor", "maxcut"):
        raise ValueError(f"g_value requires a parity instance, got kind {instance.kind!r}")
    if instance.m == 0:
        raise ValueError("g_value undefined for an empty instance")
    xv = as_assignment(x, instance.n)
    total = 0
    for c in instance.constraints:
        prod = 1
        for i in c.scope:
            prod *= int(xv[i])
        total += c.b * prod
    return total / np.sqrt(instance.m)


def _mu_constraint_exact(c: Constraint) -> Fraction:
    if c.is_xor:
        return Fraction(1, 2)
    return Fraction(sum(c.table), len(c.table))


def mu(obj: Constraint | CspInstance) -> float:
    """Exact satisfaction probability under a uniform assignment.

    For an instance, the average over constraints. Truth tables are
    enumerated directly; arity is capped at construction time.
    """
    if isinstance(obj, Constraint):
        return float(_mu_constraint_exact(obj))
    if obj.m == 0:
        raise ValueError("mu undefined for an empty instance")
    return float(sum(_mu_constraint_exact(c) for c in obj.constraints) / obj.m)


def is_triangle_free(instance: CspInstance) -> bool:
    """True iff every pair of constraints shares at most one variable and
    no three constraints pairwise intersect."""
    scopes = [frozenset(c.scope) for c in instance.constraints]
    m = len(scopes)
    adj: list[set[int]] = [set() for _ in range(m)]
    for a in range(m):
        for b in range(a + 1, m):
            common = len(scopes[a] & scopes[b])
            if common > 1:
                return False
            if common == 1:
                adj[a].add(b)
                adj[b].add(a)
    for a in range(m):
        for b in adj[a]:
            if b > a and adj[a] & adj[b]:
                return False
    return True


def degrees(instance: CspInstance) -> np.ndarray:
    """Per-variable count of constraints whose scope contains the variable."""
    deg = np.zeros(instance.n, dtype=np.int64)
    for c in instance.constraints:
        for i in c.scope:
            deg[i] += 1
    return deg


def derivative_q(constraint: Constraint, j: int, fixed: Mapping[int, int]) -> float:
    """Discrete derivative of the centered predicate at variable j.

    Returns (Pbar(fixed, x_j=+1) - Pbar(fixed, x_j=-1)) / 2 where
    Pbar = P - mu(P); the centering cancels in the difference.
    """
    if j not in constraint.scope:
        raise ValueError(f"variable {j} not in scope {constraint.scope}")
    values_plus = []
    values_minus = []
    for i in constraint.scope:
        if i == j:
            values_plus.append(1)
            values_minus.append(-1)
        else:
            if i not in fixed:
                raise ValueError(f"fixed assignment missing scope variable {i}")
            v = fixed[i]
            if v not in (-1, 1):
                raise ValueError(f"fixed value for {i} must be -1 or +1")
            values_plus.append(v)
            values_minus.append(v)
    return (constraint.evaluate_local(values_plus)
            - constraint.evaluate_local(values_minus)) / 2


def lambda_j(
    instance: CspInstance,
    j: int,
    u_set: Iterable[int],
    y: Sequence[int] | np.ndarray,
) -> float:
    """Normalized signed influence of variable j from its active constraints.

    A constraint is active for j when its scope contains j and no other
    member of u_set. Returns (1/sqrt(m)) * sum over active constraints of
    b_l * prod of y over the remaining scope variables; 0 with no active
    constraints.
    """
    u = set(u_set)
    if j not in u:
        raise ValueError(f"variable {j} not in the kept set")
    if instance.kind not in ("kxor", "maxcut"):
        raise ValueError("lambda_j requires a parity instance")
    if instance.m == 0:
        raise ValueError("lambda_j undefined for an empty instance")
    yv = np.asarray(y)
    total = 0
    for c in instance.constraints:
        if j not in c.scope:
            continue
        if any(i in u for i in c.scope if i != j):
            continue
        prod = 1
        for i in c.scope:
            if i != j:
                prod *= int(yv[i])
        total += c.b * prod
    return total / np.sqrt(instance.m)


def assignment_blocks(
    nvars: int, chunk: int = 1 << 20
) -> Iterator[tuple[int, np.ndarray]]:
    """Yields (offset, X) blocks covering all 2^nvars sign assignments.

    Row offset+r of the full enumeration has entry t equal to +1 when bit
    t of (offset+r) is set, else -1 (bit 0 = variable position 0).
    """
    total = 1 << nvars
    bits = np.arange(nvars)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        block = np.where((idx[:, None] >> bits) & 1 == 1, 1, -1).astype(np.int8)
        yield start, block


def compile_values(problem: CspInstance | WeightedGraph, active: Sequence[int]):
    """Returns an evaluator mapping an assignment block (rows of +-1 entries,
    columns aligned with `active`) to the induced sub-problem values.

    Only constraints (edges) whose scope lies entirely inside `active`
    contribute.
    """
    active = list(active)
    pos = {v: t for t, v in enumerate(active)}
    if len(pos) != len(active):
        raise ValueError("active variables must be distinct")
    if isinstance(problem, WeightedGraph):
        inner = [
            (pos[u_], pos[v_], w)
            for u_, v_, w in problem.edges
            if u_ in pos and v_ in pos
        ]

        def eval_graph_block(block: np.ndarray) -> np.ndarray:
            acc = np.zeros(block.shape[0], dtype=np.float64)
            for pu, pv, w in inner:
                acc += w * (block[:, pu] != block[:, pv])
            return acc

        return eval_graph_block
    inner_c = [c for c in problem.constraints if all(i in pos for i in c.scope)]

    def eval_csp_block(block: np.ndarray) -> np.ndarray:
        acc = np.zeros(block.shape[0], dtype=np.float64)
        for c in inner_c:
            cols = [block[:, pos[i]] for i in c.scope]
            if c.is_xor:
                prod = cols[0].astype(np.int64)
                for col in cols[1:]:
                    prod = prod * col
                acc += prod == c.b
            else:
                idx = np.zeros(block.shape[0], dtype=np.int64)
                for t, col in enumerate(cols):
                    idx |= (col == 1).astype(np.int64) << t
                acc += np.asarray(c.table, dtype=np.float64)[idx]
        return acc

    return eval_csp_block


def all_values(
    problem: CspInstance | WeightedGraph,
    active: Sequence[int],
    chunk: int = 1 << 20,
) -> np.ndarray:
    """Values of the sub-problem induced on `active`, for all 2^|active|
    assignments of the active variables in assignment_blocks order."""
    active = list(active)
    evaluate = compile_values(problem, active)
    out = np.zeros(1 << len(active), dtype=np.float64)
    for start, block in assignment_blocks(len(active), chunk):
        out[start:start + block.shape[0]] = evaluate(block)
    return out


def graph_to_instance(graph: WeightedGraph) -> CspInstance:
    """Max-Cut graph view to CSP view; requires unit weights."""
    if not graph.is_unweighted:
        raise ValueError("only unweighted graphs convert to a maxcut instance")
    cons = tuple(Constraint(scope=(u, v), b=-1) for u, v, _ in graph.edges)
    return CspInstance(n=graph.n, constraints=cons, kind="maxcut")


def instance_to_graph(instance: CspInstance) -> WeightedGraph:
    """Max-Cut CSP view to graph view."""
    if instance.kind != "maxcut":
        raise ValueError("only maxcut instances convert to a graph")
    edges = tuple((c.scope[0], c.scope[1], 1.0) for c in instance.constraints)
    return WeightedGraph(n=instance.n, edges=edges)


_INSTANCE_FIELDS = {"n", "kind", "constraints", "edges"}
_CONSTRAINT_FIELDS = {"scope", "b", "table"}


def instance_to_json(problem: CspInstance | WeightedGraph) -> str:
    if isinstance(problem, WeightedGraph):
        doc = {
            "n": problem.n,
            "kind": "maxcut",
            "edges": [[u, v, w] for u, v, w in problem.edges],
        }
    else:
        cons = []
        for c in problem.constraints:
            if c.is_xor:
                cons.append({"scope": list(c.scope), "b": c.b})
            else:
                cons.append({"scope": list(c.scope), "table": list(c.table)})
        doc = {"n": problem.n, "kind": problem.kind, "constraints": cons}
    return json.dumps(doc, indent=None, separators=(",", ":"), sort_keys=True)


def instance_from_json(text: str) -> CspInstance | WeightedGraph:
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError("instance document must be a JSON object")
    unknown = set(doc) - _INSTANCE_FIELDS
    if unknown:
        raise ValueError(f"unknown instance fields: {sorted(unknown)}")
    if "n" not in doc or "kind" not in doc:
        raise ValueError("instance document requires 'n' and 'kind'")
    n, kind = doc["n"], doc["kind"]
    if "edges" in doc:
        if kind != "maxcut":
            raise ValueError("'edges' is only valid for kind 'maxcut'")
        if "constraints" in doc:
            raise ValueError("give either 'constraints' or 'edges', not both")
        edges = tuple((int(u), int(v), float(w)) for u, v, w in doc["edges"])
        return WeightedGraph(n=int(n), edges=edges)
    cons = []
    for entry in doc.get("constraints", []):
        unknown = set(entry) - _CONSTRAINT_FIELDS
        if unknown:
            raise ValueError(f"unknown constraint fields: {sorted(unknown)}")
        scope = tuple(int(i) for i in entry["scope"])
        if "b" in entry and "table" in entry:
            raise ValueError("give either 'b' or 'table', not both")
        if "b" in entry:
            cons.append(Constraint(scope=scope, b=int(entry["b"])))
        elif "table" in entry:
            cons.append(Constraint(scope=scope, table=tuple(int(t) for t in entry["table"])))
        else:
            raise ValueError("constraint requires 'b' or 'table'")
    return CspInstance(n=int(n), constraints=tuple(cons), kind=kind)


def load_instance(path: str) -> CspInstance | WeightedGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_json(fh.read())


def save_instance(problem: CspInstance | WeightedGraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(instance_to_json(problem))
        fh.write("\n")


def load_edge_list(path: str) -> WeightedGraph:
    """Parses the text format: one 'u v [weight]' line per edge, with '#'
    comments and blank lines ignored; vertices 0-indexed."""
    edges: list[tuple[int, int, float]] = []
    max_vertex = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ValueError(f"line {lineno}: expected 'u v [weight]', got {raw!r}")
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
            edges.append((u, v, w))
            max_vertex = max(max_vertex, u, v)
    return WeightedGraph(n=max_vertex + 1, edges=tuple(edges))
