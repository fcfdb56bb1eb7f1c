# SPDX-License-Identifier: GPL-2.0+
"""Hypergraph attention policy and value network.

Each layer runs two single head attention phases. In the composition phase
every edge attends over its ordered arguments, with sinusoidal positional
encodings added to keys and values. In the contextualization phase every
entity attends over the half-step embeddings of the edges that use it (a
compound node also attends to the Constructor that produced it). Both phases
use LN(h + Attn(h, ...)) with a parameter free layer norm.

Actions are chosen autoregressively: an operator head picks a rule among the
ones present in the legal action list, then one pointer distribution per
operand slot picks an entity. Pointer masks come from the legal action trie so
the probability of every complete action is normalized over the legal list.

Gradients are written out by hand for this fixed architecture.
"""
import dataclasses
import io
import json
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import config, util
from .hypergraph import (EDGE, OPERATORS, SORTS, EntityRef, MathesisError,
                         MathState, NodeType)
from .rules import CONSTRUCTORS, Action, RuleLibrary

MAGIC = b"MATHESIS-BRAIN\n"
FORMAT_VERSION = 1
LN_EPS = 1e-5
OOV = "OOV"


class BrainError(MathesisError):
    pass


def build_vocab() -> List[str]:
    res = [OOV]
    res.extend(f"E:{I}" for I in sorted(OPERATORS))
    res.extend(f"N:{I}" for I in CONSTRUCTORS)
    for kind in (NodeType.Variable, NodeType.Constant):
        res.extend(f"N:{kind.value}:{I}" for I in SORTS)
    return res


def entity_token(state: MathState, ref: EntityRef) -> str:
    """Tokens depend on structure only, never on labels or ids"""
    if ref.kind == EDGE:
        return f"E:{state.edge(ref.id).operator}"
    n = state.node(ref.id)
    if n.node_type == NodeType.CompoundTerm:
        return f"N:{n.label}"
    return f"N:{n.node_type.value}:{n.sort}"


def positional_table(n: int, d: int) -> np.ndarray:
    pos = np.arange(n, dtype=np.float64)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def _logit(p: float) -> float:
    return math.log(p / (1 - p))


class BrainParams(object):
    """All trainable arrays of the network, with a stable flat ordering"""
    def __init__(self, ops: Sequence[str], vocab: Sequence[str], d_model: int,
                 layers: int, max_arity: int, n_slots: int,
                 arrays: Optional[Dict[str, np.ndarray]] = None):
        self.ops = list(ops)
        self.vocab = list(vocab)
        self.d_model = d_model
        self.layers = layers
        self.max_arity = max_arity
        self.n_slots = n_slots
        self._tok = {k: i for i, k in enumerate(self.vocab)}
        self._op = {k: i for i, k in enumerate(self.ops)}
        self.pe = positional_table(max_arity, d_model)
        self.arrays: Dict[str, np.ndarray] = {}
        shapes = self.shapes()
        for name in self.names:
            if arrays is None:
                self.arrays[name] = np.zeros(shapes[name])
            else:
                arr = np.asarray(arrays[name], dtype=np.float64)
                if arr.shape != shapes[name]:
                    raise BrainError(f"Parameter {name} has shape {arr.shape}, "
                                     f"expected {shapes[name]}")
                self.arrays[name] = arr.copy()

    @property
    def names(self) -> List[str]:
        res = ["emb", "fact"]
        for l in range(self.layers):
            for phase in ("p1", "p2"):
                res.extend(f"l{l}.{phase}.{I}" for I in "qkvo")
        res.extend(("op_w", "op_b", "op_emb", "slot_emb", "ptr_q", "ptr_k",
                    "val_w", "val_b"))
        return res

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        d = self.d_model
        res = {
            "emb": (len(self.vocab), d),
            "fact": (d, ),
            "op_w": (len(self.ops), d),
            "op_b": (len(self.ops), ),
            "op_emb": (len(self.ops), d),
            "slot_emb": (self.n_slots, d),
            "ptr_q": (d, d),
            "ptr_k": (d, d),
            "val_w": (d, ),
            "val_b": (1, ),
        }
        for name in self.names:
            if name.startswith("l"):
                res[name] = (d, d)
        return res

    @classmethod
    def initial(cls, library: RuleLibrary, cfg: config.BrainConfig,
                seed: int = 0) -> "BrainParams":
        n_slots = max(len(library.get(I).slot_kinds) for I in library.names)
        self = cls(library.names, build_vocab(), cfg.d_model, cfg.layers,
                   cfg.max_arity, n_slots)
        rng = np.random.default_rng(seed)
        d = cfg.d_model
        scale = cfg.init_scale
        for name in self.names:
            shape = self.arrays[name].shape
            if name == "emb":
                self.arrays[name] = rng.standard_normal(shape)
            elif name in ("fact", "op_emb", "slot_emb"):
                self.arrays[name] = rng.standard_normal(shape) * scale
            elif name.startswith("l") or name in ("ptr_q", "ptr_k"):
                self.arrays[name] = rng.standard_normal(shape) / np.sqrt(d)
            elif name == "val_w":
                self.arrays[name] = rng.standard_normal(shape) * scale / np.sqrt(d)
        # Heads start flat so the first policy is uniform over operators
        self.arrays["val_b"] = np.array([_logit(cfg.value_prior)])
        return self

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def token_index(self, token: str) -> int:
        return self._tok.get(token, self._tok[OOV])

    def op_index(self, op: str) -> int:
        try:
            return self._op[op]
        except KeyError:
            raise BrainError(f"Operator {op} is not known to these parameters")

    @property
    def size(self) -> int:
        return sum(self.arrays[I].size for I in self.names)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.arrays[I].ravel() for I in self.names])

    def flatten_grads(self, grads: Dict[str, np.ndarray]) -> np.ndarray:
        return np.concatenate([
            grads[I].ravel() if I in grads else np.zeros(self.arrays[I].size)
            for I in self.names
        ])

    def with_flat(self, vec: np.ndarray) -> "BrainParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.size, ):
            raise BrainError(
                f"Flat vector has {vec.size} entries, expected {self.size}")
        arrays = {}
        pos = 0
        for name in self.names:
            shape = self.arrays[name].shape
            n = self.arrays[name].size
            arrays[name] = vec[pos:pos + n].reshape(shape)
            pos += n
        return self._like(arrays)

    def copy(self) -> "BrainParams":
        return self._like(self.arrays)

    def _like(self, arrays) -> "BrainParams":
        return BrainParams(self.ops, self.vocab, self.d_model, self.layers,
                           self.max_arity, self.n_slots, arrays)

    def header(self, meta: Optional[Dict] = None) -> Dict:
        res = {
            "format": FORMAT_VERSION,
            "d_model": self.d_model,
            "layers": self.layers,
            "max_arity": self.max_arity,
            "n_slots": self.n_slots,
            "vocab": self.vocab,
            "ops": self.ops,
            "shapes": {k: list(v) for k, v in self.shapes().items()},
            "order": self.names,
        }
        if meta:
            res["meta"] = meta
        return res

    def to_bytes(self, meta: Optional[Dict] = None) -> bytes:
        head = util.stable_json(self.header(meta)).encode()
        return MAGIC + head + b"\n" + self.flat().astype("<f8").tobytes()

    def save(self, fn: str, meta: Optional[Dict] = None):
        with open(fn, "wb") as F:
            F.write(self.to_bytes(meta))

    @classmethod
    def from_bytes(cls, data: bytes) -> Tuple["BrainParams", Dict]:
        F = io.BytesIO(data)
        if F.readline() != MAGIC:
            raise BrainError("Not a parameter checkpoint")
        try:
            head = json.loads(F.readline())
        except ValueError as ex:
            raise BrainError(f"Corrupt checkpoint header: {ex}") from None
        if head.get("format") != FORMAT_VERSION:
            raise BrainError(
                f"Checkpoint format {head.get('format')} is not supported, "
                f"expected {FORMAT_VERSION}")
        self = cls(head["ops"], head["vocab"], head["d_model"], head["layers"],
                   head["max_arity"], head["n_slots"])
        if head["order"] != self.names:
            raise BrainError("Checkpoint parameter order does not match")
        vec = np.frombuffer(F.read(), dtype="<f8").astype(np.float64)
        return self.with_flat(vec), head.get("meta", {})

    @classmethod
    def load(cls, fn: str) -> Tuple["BrainParams", Dict]:
        with open(fn, "rb") as F:
            return cls.from_bytes(F.read())


def _ln(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    xc = x - x.mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
    return xc * inv, inv


def _ln_back(dy: np.ndarray, y: np.ndarray, inv: np.ndarray) -> np.ndarray:
    return inv * (dy - dy.mean(axis=-1, keepdims=True) -
                  y * (dy * y).mean(axis=-1, keepdims=True))


def _attn(Hq, Hkv, mask, Wq, Wk, Wv, Wo):
    """Single head scaled dot-product attention of each query row over its
    own masked key row. Rows without keys produce a zero update."""
    d = Hq.shape[1]
    Q = Hq @ Wq
    K = Hkv @ Wk
    V = Hkv @ Wv
    S = np.einsum("nd,nmd->nm", Q, K) / np.sqrt(d)
    S = np.where(mask, S, -1e9)
    S = S - S.max(axis=1, keepdims=True)
    A = np.exp(S) * mask
    tot = A.sum(axis=1, keepdims=True)
    A = A / np.where(tot > 0, tot, 1.0)
    C = np.einsum("nm,nmd->nd", A, V)
    return C @ Wo, (Hq, Hkv, Q, K, V, A, C)


def _attn_back(dU, cache, Wq, Wk, Wv, Wo):
    Hq, Hkv, Q, K, V, A, C = cache
    d = Q.shape[1]
    gWo = C.T @ dU
    dC = dU @ Wo.T
    dA = np.einsum("nd,nmd->nm", dC, V)
    dV = A[:, :, None] * dC[:, None, :]
    dS = A * (dA - (A * dA).sum(axis=1, keepdims=True))
    dQ = np.einsum("nm,nmd->nd", dS, K) / np.sqrt(d)
    dK = dS[:, :, None] * Q[:, None, :] / np.sqrt(d)
    gWq = Hq.T @ dQ
    gWk = np.einsum("nmi,nmj->ij", Hkv, dK)
    gWv = np.einsum("nmi,nmj->ij", Hkv, dV)
    dHq = dQ @ Wq.T
    dHkv = dK @ Wk.T + dV @ Wv.T
    return dHq, dHkv, (gWq, gWk, gWv, gWo)


class _Structure(object):
    """Index arrays describing one state for batched attention"""
    def __init__(self, state: MathState, params: BrainParams):
        self.refs = state.entities()
        self.index = {r: i for i, r in enumerate(self.refs)}
        n = len(self.refs)
        self.tok = np.array(
            [params.token_index(entity_token(state, I)) for I in self.refs],
            dtype=np.int64)
        self.fact = np.array(
            [1.0 if state.is_fact(I) else 0.0 for I in self.refs])

        edges = [I for I in self.refs if I.kind == EDGE]
        self.edge_rows = np.array([self.index[I] for I in edges],
                                  dtype=np.int64)
        P = params.max_arity
        self.arg_idx = np.zeros((len(edges), P), dtype=np.int64)
        self.arg_mask = np.zeros((len(edges), P), dtype=bool)
        for row, ref in enumerate(edges):
            args = state.edge(ref.id).args
            if len(args) > P:
                raise BrainError(
                    f"{ref} has {len(args)} arguments, the positional table "
                    f"only covers {P}")
            for j, a in enumerate(args):
                self.arg_idx[row, j] = self.index[a]
                self.arg_mask[row, j] = True

        nbrs: List[List[int]] = []
        for ref in self.refs:
            cur = [self.index[EntityRef(EDGE, I)] for I in state.parents(ref)]
            if ref.kind != EDGE:
                prod = state.producer(ref.id)
                if prod is not None:
                    cur.append(self.index[EntityRef(EDGE, prod.id)])
            nbrs.append(cur)
        M = max((len(I) for I in nbrs), default=0)
        self.nbr_idx = np.zeros((n, M), dtype=np.int64)
        self.nbr_mask = np.zeros((n, M), dtype=bool)
        for row, cur in enumerate(nbrs):
            self.nbr_idx[row, :len(cur)] = cur
            self.nbr_mask[row, :len(cur)] = True
        self.has_nbr = self.nbr_mask.any(axis=1)


@dataclasses.dataclass
class Encoding:
    refs: List[EntityRef]
    index: Dict[EntityRef, int]
    H: np.ndarray
    structure: _Structure
    cache: list

    def embeddings(self) -> Dict[EntityRef, np.ndarray]:
        return {r: self.H[i] for i, r in enumerate(self.refs)}

    def row(self, ref: EntityRef) -> np.ndarray:
        return self.H[self.index[ref]]


def _layer_weights(params: BrainParams, l: int, phase: str):
    return tuple(params[f"l{l}.{phase}.{I}"] for I in "qkvo")


def encode(state: MathState, params: BrainParams) -> Encoding:
    st = _Structure(state, params)
    d = params.d_model
    if not st.refs:
        return Encoding([], {}, np.zeros((0, d)), st, [])
    pre = params["emb"][st.tok] + st.fact[:, None] * params["fact"]
    H, inv = _ln(pre)
    caches: list = [(H, inv)]
    pe = params.pe[None, :, :]
    for l in range(params.layers):
        layer = {}
        half = H.copy()
        if len(st.edge_rows):
            Hq = H[st.edge_rows]
            Hkv = H[st.arg_idx] + pe
            U, layer["ac1"] = _attn(Hq, Hkv, st.arg_mask,
                                    *_layer_weights(params, l, "p1"))
            Y, yinv = _ln(Hq + U)
            half[st.edge_rows] = Y
            layer["ln1"] = (Y, yinv)
        out = half
        if st.nbr_idx.shape[1]:
            U2, layer["ac2"] = _attn(half, half[st.nbr_idx],
                                     st.nbr_mask,
                                     *_layer_weights(params, l, "p2"))
            Y2, y2inv = _ln(half + U2)
            out = np.where(st.has_nbr[:, None], Y2, half)
            layer["ln2"] = (Y2, y2inv)
        caches.append(layer)
        H = out
    return Encoding(st.refs, st.index, H, st, caches)


def _encode_back(params: BrainParams, enc: Encoding,
                 dH: np.ndarray) -> Dict[str, np.ndarray]:
    st = enc.structure
    grads: Dict[str, np.ndarray] = {}
    if not enc.refs:
        return grads
    has = st.has_nbr[:, None]
    for l in reversed(range(params.layers)):
        layer = enc.cache[l + 1]
        if "ac2" in layer:
            Y2, y2inv = layer["ln2"]
            dZ2 = _ln_back(np.where(has, dH, 0.0), Y2, y2inv)
            dHalf = np.where(has, 0.0, dH) + dZ2
            dHq, dHkv, g = _attn_back(dZ2, layer["ac2"],
                                      *_layer_weights(params, l, "p2"))
            dHalf += dHq
            np.add.at(dHalf, st.nbr_idx, dHkv * st.nbr_mask[:, :, None])
            for k, v in zip("qkvo", g):
                grads[f"l{l}.p2.{k}"] = v
        else:
            dHalf = dH
        if "ac1" in layer:
            Y, yinv = layer["ln1"]
            dZ1 = _ln_back(dHalf[st.edge_rows], Y, yinv)
            dH = dHalf.copy()
            dHq, dHkv, g = _attn_back(dZ1, layer["ac1"],
                                      *_layer_weights(params, l, "p1"))
            dH[st.edge_rows] = dZ1 + dHq
            np.add.at(dH, st.arg_idx, dHkv * st.arg_mask[:, :, None])
            for k, v in zip("qkvo", g):
                grads[f"l{l}.p1.{k}"] = v
        else:
            dH = dHalf
    H0, inv0 = enc.cache[0]
    dpre = _ln_back(dH, H0, inv0)
    gemb = np.zeros_like(params["emb"])
    np.add.at(gemb, st.tok, dpre)
    grads["emb"] = gemb
    grads["fact"] = (dpre * st.fact[:, None]).sum(axis=0)
    return grads


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max())
    return e / e.sum()


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def value(state: MathState, params: BrainParams,
          enc: Optional[Encoding] = None) -> float:
    """Estimated probability that the state lies on a zero energy proof"""
    if enc is None:
        enc = encode(state, params)
    if not enc.refs:
        return _sigmoid(float(params["val_b"][0]))
    z = float(params["val_w"] @ enc.H.mean(axis=0) + params["val_b"][0])
    return _sigmoid(z)


def grad_value_loss(state: MathState, params: BrainParams,
                    target: float) -> Tuple[float, np.ndarray]:
    """(loss, d loss / d params) for loss = (value - target)^2"""
    enc = encode(state, params)
    v = value(state, params, enc)
    dz = 2 * (v - target) * v * (1 - v)
    grads: Dict[str, np.ndarray] = {"val_b": np.array([dz])}
    if enc.refs:
        n = len(enc.refs)
        grads["val_w"] = dz * enc.H.mean(axis=0)
        dH = np.tile(dz * params["val_w"] / n, (n, 1))
        grads.update(_encode_back(params, enc, dH))
    return (v - target)**2, params.flatten_grads(grads)


@dataclasses.dataclass
class _Slot:
    op: str
    prefix: Tuple[EntityRef, ...]
    allowed: List[EntityRef]
    rows: np.ndarray
    x: np.ndarray
    q: np.ndarray
    probs: np.ndarray


class ActionDistribution(object):
    """Factorized distribution over a legal action list"""
    def __init__(self, params: BrainParams, enc: Encoding,
                 legal: Sequence[Action]):
        if not legal:
            raise BrainError("No legal actions")
        self.params = params
        self.enc = enc
        self.legal = list(legal)
        self._legal_set = set(self.legal)
        self.g = enc.H.mean(axis=0)
        self.K = enc.H @ params["ptr_k"]

        present = []
        for a in self.legal:
            if a.op not in present:
                present.append(a.op)
        present.sort(key=params.op_index)
        self.present = present
        self.op_rows = np.array([params.op_index(I) for I in present])
        logits = params["op_w"][self.op_rows] @ self.g + params["op_b"][
            self.op_rows]
        p = _softmax(logits)
        self.op_probs: Dict[str, float] = {
            k: float(v) for k, v in zip(present, p)}
        self._op_p = p

        self._trie: Dict[Tuple[str, Tuple[EntityRef, ...]],
                         List[EntityRef]] = {}
        for a in self.legal:
            for i, ref in enumerate(a.operands):
                cur = self._trie.setdefault((a.op, a.operands[:i]), [])
                if ref not in cur:
                    cur.append(ref)
        for v in self._trie.values():
            v.sort(key=lambda r: enc.index[r])
        self._slots: Dict[Tuple[str, Tuple[EntityRef, ...]], _Slot] = {}

    def slot(self, op: str, prefix: Tuple[EntityRef, ...]) -> _Slot:
        key = (op, tuple(prefix))
        res = self._slots.get(key)
        if res is not None:
            return res
        allowed = self._trie.get(key)
        if not allowed:
            raise BrainError(f"No legal operand after {op}{tuple(prefix)}")
        params = self.params
        i = len(prefix)
        x = (self.g + params["op_emb"][params.op_index(op)] +
             params["slot_emb"][i])
        for r in prefix:
            x = x + self.enc.row(r)
        q = x @ params["ptr_q"]
        rows = np.array([self.enc.index[r] for r in allowed])
        logits = self.K[rows] @ q / np.sqrt(params.d_model)
        res = _Slot(op, key[1], allowed, rows, x, q, _softmax(logits))
        self._slots[key] = res
        return res

    def slot_probs(self, op: str,
                   prefix: Sequence[EntityRef] = ()) -> Dict[EntityRef, float]:
        """Pointer probabilities over every entity, masked ones exactly 0"""
        s = self.slot(op, tuple(prefix))
        res = {r: 0.0 for r in self.enc.refs}
        for r, p in zip(s.allowed, s.probs):
            res[r] = float(p)
        return res

    def log_prob(self, action: Action) -> float:
        if action not in self._legal_set:
            raise BrainError(f"{action} is not a legal action")
        res = math.log(self.op_probs[action.op])
        for i, ref in enumerate(action.operands):
            s = self.slot(action.op, action.operands[:i])
            res += math.log(s.probs[s.allowed.index(ref)])
        return res

    def prob(self, action: Action) -> float:
        return math.exp(self.log_prob(action))

    def probs(self) -> np.ndarray:
        """Probabilities aligned with the legal action list"""
        return np.array([self.prob(I) for I in self.legal])

    def op_entropy(self) -> float:
        p = self._op_p
        return float(-(p * np.log(p)).sum())


def policy(state: MathState, params: BrainParams,
           legal: Sequence[Action],
           enc: Optional[Encoding] = None) -> ActionDistribution:
    if not legal:
        raise BrainError("No legal actions")
    if enc is None:
        enc = encode(state, params)
    return ActionDistribution(params, enc, legal)


def _head_back(dist: ActionDistribution, d_op: np.ndarray,
               slots: Sequence[Tuple[_Slot, np.ndarray]]) -> np.ndarray:
    """Gradient of a scalar given its derivatives w.r.t. the operator logits
    (over dist.present) and w.r.t. pointer logits of some slots"""
    params = dist.params
    enc = dist.enc
    d = params.d_model
    grads: Dict[str, np.ndarray] = {}
    go_w = np.zeros_like(params["op_w"])
    go_b = np.zeros_like(params["op_b"])
    go_w[dist.op_rows] = np.outer(d_op, dist.g)
    go_b[dist.op_rows] = d_op
    grads["op_w"] = go_w
    grads["op_b"] = go_b
    dg = params["op_w"][dist.op_rows].T @ d_op

    dH = np.zeros_like(enc.H)
    dK = np.zeros_like(dist.K)
    g_ptr_q = np.zeros_like(params["ptr_q"])
    g_op_emb = np.zeros_like(params["op_emb"])
    g_slot = np.zeros_like(params["slot_emb"])
    for s, dlogits in slots:
        dq = dist.K[s.rows].T @ dlogits / np.sqrt(d)
        np.add.at(dK, s.rows, np.outer(dlogits, s.q) / np.sqrt(d))
        g_ptr_q += np.outer(s.x, dq)
        dx = params["ptr_q"] @ dq
        dg += dx
        g_op_emb[params.op_index(s.op)] += dx
        g_slot[len(s.prefix)] += dx
        for r in s.prefix:
            dH[enc.index[r]] += dx
    grads["ptr_q"] = g_ptr_q
    grads["op_emb"] = g_op_emb
    grads["slot_emb"] = g_slot
    grads["ptr_k"] = enc.H.T @ dK
    dH += dK @ params["ptr_k"].T
    dH += dg / len(enc.refs)
    grads.update(_encode_back(params, enc, dH))
    return params.flatten_grads(grads)


def grad_log_policy(state: MathState, params: BrainParams, action: Action,
                    legal: Sequence[Action],
                    dist: Optional[ActionDistribution] = None
                    ) -> Tuple[float, np.ndarray]:
    """(log pi(action | state), d log pi / d params)"""
    if dist is None:
        dist = policy(state, params, legal)
    logp = dist.log_prob(action)
    d_op = -dist._op_p.copy()
    d_op[dist.present.index(action.op)] += 1
    slots = []
    for i, ref in enumerate(action.operands):
        s = dist.slot(action.op, action.operands[:i])
        dl = -s.probs.copy()
        dl[s.allowed.index(ref)] += 1
        slots.append((s, dl))
    return logp, _head_back(dist, d_op, slots)


def grad_op_entropy(state: MathState, params: BrainParams,
                    legal: Sequence[Action],
                    dist: Optional[ActionDistribution] = None
                    ) -> Tuple[float, np.ndarray]:
    """Entropy of the operator head and its gradient"""
    if dist is None:
        dist = policy(state, params, legal)
    p = dist._op_p
    ent = dist.op_entropy()
    d_op = -p * (np.log(p) + ent)
    return ent, _head_back(dist, d_op, [])


def greedy_action(dist: ActionDistribution) -> Action:
    """Most probable legal action, ties to the lowest legal index"""
    probs = dist.probs()
    return dist.legal[int(np.argmax(probs))]


def sample_action(dist: ActionDistribution, rng: np.random.Generator,
                  temperature: float = 1.0) -> Action:
    probs = dist.probs()
    if temperature != 1.0:
        if temperature <= 0:
            return dist.legal[int(np.argmax(probs))]
        probs = np.power(probs, 1.0 / temperature)
    cum = np.cumsum(probs / probs.sum())
    idx = int(np.searchsorted(cum, rng.random(), side="right"))
    return dist.legal[min(idx, len(dist.legal) - 1)]
