"""Temporal encoder + detector with explicit forward/backward passes.

Each encoder is a per-frame mixing layer (tanh) followed by a bidirectional
tanh recurrence and a linear projection into the shared embedding space.
Detector heads are linear and emit raw logits; losses own the activations.
A fused model runs two encoders and sums their embeddings element-wise
before the heads.

Parameters live in one flat float64 vector; named views (see
:func:`param_specs`) give shaped, writable windows into it, which keeps
optimizer updates and checkpoints trivial. Gradients are accumulated into an
equally-shaped flat vector by the ``*_backward`` helpers, so analytic
gradients can be checked against finite differences parameter-by-parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from spotkd._kernels import scan_backward, scan_forward
from spotkd.exceptions import NumericError, ShapeError


@dataclass(frozen=True)
class EncoderArch:
    in_dim: int
    hidden: int
    embed: int


@dataclass(frozen=True)
class ModelArch:
    kind: str  # "single" | "fused"
    encoders: tuple[EncoderArch, ...]
    n_fine: int
    n_coarse: int = 2

    def __post_init__(self):
        if self.kind not in ("single", "fused"):
            raise ShapeError(f"unknown model kind {self.kind!r}")
        expected = 1 if self.kind == "single" else 2
        if len(self.encoders) != expected:
            raise ShapeError(f"{self.kind} model needs {expected} encoder(s)")
        if len({e.embed for e in self.encoders}) != 1:
            raise ShapeError("all encoders must share the embedding dimension")

    @property
    def embed(self) -> int:
        return self.encoders[0].embed


def param_specs(arch: ModelArch) -> list[tuple[str, tuple[int, ...]]]:
    specs: list[tuple[str, tuple[int, ...]]] = []
    for i, enc in enumerate(arch.encoders):
        p = f"enc{i}."
        h, e = enc.hidden, enc.embed
        specs += [
            (p + "mix_w", (enc.in_dim, h)), (p + "mix_b", (h,)),
            (p + "fwd_in", (h, h)), (p + "fwd_rec", (h, h)), (p + "fwd_b", (h,)),
            (p + "bwd_in", (h, h)), (p + "bwd_rec", (h, h)), (p + "bwd_b", (h,)),
            (p + "out_w", (2 * h, e)), (p + "out_b", (e,)),
        ]
    e = arch.embed
    specs += [
        ("head.coarse_w", (e, arch.n_coarse)), ("head.coarse_b", (arch.n_coarse,)),
        ("head.fine_w", (e, arch.n_fine)), ("head.fine_b", (arch.n_fine,)),
    ]
    return specs


def param_count(arch: ModelArch) -> int:
    return sum(int(np.prod(shape)) for _, shape in param_specs(arch))


def _make_views(arch: ModelArch, flat: np.ndarray) -> dict[str, np.ndarray]:
    views = {}
    offset = 0
    for name, shape in param_specs(arch):
        size = int(np.prod(shape))
        views[name] = flat[offset:offset + size].reshape(shape)
        offset += size
    return views


@dataclass
class ModelState:
    """Flat parameters plus architecture metadata and optimizer slots."""

    arch: ModelArch
    params: np.ndarray
    opt: Optional["object"] = None
    _views: dict = field(default_factory=dict, repr=False)

    def views(self) -> dict[str, np.ndarray]:
        if not self._views:
            self._views = _make_views(self.arch, self.params)
        return self._views

    def copy(self) -> "ModelState":
        return ModelState(arch=self.arch, params=self.params.copy())


def init_model(arch: ModelArch, seed: int) -> ModelState:
    """Fan-in-scaled uniform init for matrices, zero biases; fully seeded."""
    rng = np.random.default_rng(seed)
    flat = np.zeros(param_count(arch))
    state = ModelState(arch=arch, params=flat)
    for name, view in state.views().items():
        if view.ndim == 2:
            bound = 1.0 / np.sqrt(view.shape[0])
            view[:] = rng.uniform(-bound, bound, size=view.shape)
    return state


def _check_input(x, expect_last: int, name: str):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != expect_last:
        raise ShapeError(f"{name} last dim {x.shape[-1]} != expected {expect_last}")
    if not np.all(np.isfinite(x)):
        raise NumericError(f"{name} contains non-finite values")
    return x


def _encode(views: dict, prefix: str, x: np.ndarray):
    """x: (B, T, in_dim) -> embeddings (B, T, E) plus backward cache."""
    z = np.tanh(x @ views[prefix + "mix_w"] + views[prefix + "mix_b"])
    pf = z @ views[prefix + "fwd_in"] + views[prefix + "fwd_b"]
    pb = z @ views[prefix + "bwd_in"] + views[prefix + "bwd_b"]
    pf_tm = np.ascontiguousarray(pf.transpose(1, 0, 2))
    pb_rev = np.ascontiguousarray(pb.transpose(1, 0, 2)[::-1])
    hf_tm = scan_forward(pf_tm, views[prefix + "fwd_rec"])
    hb_rev = scan_forward(pb_rev, views[prefix + "bwd_rec"])
    hf = hf_tm.transpose(1, 0, 2)
    hb = hb_rev[::-1].transpose(1, 0, 2)
    hcat = np.concatenate([hf, hb], axis=2)
    emb = hcat @ views[prefix + "out_w"] + views[prefix + "out_b"]
    cache = {"x": x, "z": z, "hf_tm": hf_tm, "hb_rev": hb_rev, "hcat": hcat}
    return emb, cache


def _encode_backward(views: dict, grads: dict, prefix: str, cache: dict,
                     demb: np.ndarray) -> None:
    hidden = views[prefix + "fwd_rec"].shape[0]
    hcat2 = cache["hcat"].reshape(-1, 2 * hidden)
    de2 = demb.reshape(-1, demb.shape[-1])
    grads[prefix + "out_w"] += hcat2.T @ de2
    grads[prefix + "out_b"] += de2.sum(axis=0)
    dhcat = demb @ views[prefix + "out_w"].T
    dhf = np.ascontiguousarray(dhcat[..., :hidden].transpose(1, 0, 2))
    dhb_rev = np.ascontiguousarray(dhcat[..., hidden:].transpose(1, 0, 2)[::-1])
    dpf_tm, dfrec = scan_backward(cache["hf_tm"], views[prefix + "fwd_rec"], dhf)
    dpb_rev, dbrec = scan_backward(cache["hb_rev"], views[prefix + "bwd_rec"], dhb_rev)
    grads[prefix + "fwd_rec"] += dfrec
    grads[prefix + "bwd_rec"] += dbrec
    dpf = dpf_tm.transpose(1, 0, 2)
    dpb = dpb_rev[::-1].transpose(1, 0, 2)
    z = cache["z"]
    z2 = z.reshape(-1, hidden)
    grads[prefix + "fwd_in"] += z2.T @ dpf.reshape(-1, hidden)
    grads[prefix + "fwd_b"] += dpf.sum(axis=(0, 1))
    grads[prefix + "bwd_in"] += z2.T @ dpb.reshape(-1, hidden)
    grads[prefix + "bwd_b"] += dpb.sum(axis=(0, 1))
    dz = dpf @ views[prefix + "fwd_in"].T + dpb @ views[prefix + "bwd_in"].T
    dpre = dz * (1.0 - z * z)
    x2 = cache["x"].reshape(-1, cache["x"].shape[-1])
    grads[prefix + "mix_w"] += x2.T @ dpre.reshape(-1, hidden)
    grads[prefix + "mix_b"] += dpre.sum(axis=(0, 1))


@dataclass
class ForwardCache:
    emb: np.ndarray
    coarse: np.ndarray
    fine: np.ndarray
    enc_caches: tuple


def forward_batch(state: ModelState, inputs) -> ForwardCache:
    """Batched full forward pass.

    ``inputs`` is one (B, T, in_dim) array for single models, or a pair of
    them for fused models. Returns embeddings, both heads' logits, and the
    cache needed by :func:`backward_batch`.
    """
    views = state.views()
    if state.arch.kind == "single":
        x = _check_input(inputs, state.arch.encoders[0].in_dim, "input")
        emb, cache = _encode(views, "enc0.", x)
        enc_caches = (cache,)
    else:
        x0 = _check_input(inputs[0], state.arch.encoders[0].in_dim, "input[0]")
        x1 = _check_input(inputs[1], state.arch.encoders[1].in_dim, "input[1]")
        if x0.shape[:2] != x1.shape[:2]:
            raise ShapeError(f"fused inputs disagree on (B,T): {x0.shape} vs {x1.shape}")
        e0, c0 = _encode(views, "enc0.", x0)
        e1, c1 = _encode(views, "enc1.", x1)
        emb = e0 + e1
        enc_caches = (c0, c1)
    coarse = emb @ views["head.coarse_w"] + views["head.coarse_b"]
    fine = emb @ views["head.fine_w"] + views["head.fine_b"]
    return ForwardCache(emb=emb, coarse=coarse, fine=fine, enc_caches=enc_caches)


def backward_batch(state: ModelState, fwd: ForwardCache, dcoarse=None, dfine=None,
                   demb=None) -> np.ndarray:
    """Flat gradient vector for upstream gradients on logits and/or embeddings."""
    views = state.views()
    flat = np.zeros_like(state.params)
    grads = _make_views(state.arch, flat)
    emb = fwd.emb
    dtotal = np.zeros_like(emb)
    if demb is not None:
        dtotal += demb
    e2 = emb.reshape(-1, emb.shape[-1])
    if dcoarse is not None:
        dc2 = dcoarse.reshape(-1, dcoarse.shape[-1])
        grads["head.coarse_w"] += e2.T @ dc2
        grads["head.coarse_b"] += dc2.sum(axis=0)
        dtotal += dcoarse @ views["head.coarse_w"].T
    if dfine is not None:
        df2 = dfine.reshape(-1, dfine.shape[-1])
        grads["head.fine_w"] += e2.T @ df2
        grads["head.fine_b"] += df2.sum(axis=0)
        dtotal += dfine @ views["head.fine_w"].T
    for i, cache in enumerate(fwd.enc_caches):
        _encode_backward(views, grads, f"enc{i}.", cache, dtotal)
    return flat


# ---------------------------------------------------------------------------
# Single-clip convenience ops
# ---------------------------------------------------------------------------

def forward_teacher(state: ModelState, pose) -> np.ndarray:
    """Embed one pose clip (T, P, V, 2) -> (T, E)."""
    pose = np.asarray(pose, dtype=float)
    if pose.ndim != 4:
        raise ShapeError(f"pose must be (T,P,V,2), got {pose.shape}")
    flat = pose.reshape(pose.shape[0], -1)
    return forward_student(state, flat)


def forward_student(state: ModelState, feat) -> np.ndarray:
    """Embed one feature clip (T, D) -> (T, E)."""
    feat = np.asarray(feat, dtype=float)
    if feat.ndim != 2:
        raise ShapeError(f"features must be (T,D), got {feat.shape}")
    fwd = forward_batch(state, feat[None])
    return fwd.emb[0]


def fuse(a, b) -> np.ndarray:
    """Element-wise additive fusion of two embedding tensors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"cannot fuse shapes {a.shape} and {b.shape}")
    return a + b


def detect(state: ModelState, emb) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame head logits for one clip's embeddings (T, E)."""
    emb = np.asarray(emb, dtype=float)
    views = state.views()
    if emb.ndim != 2 or emb.shape[1] != state.arch.embed:
        raise ShapeError(f"embeddings must be (T,{state.arch.embed}), got {emb.shape}")
    coarse = emb @ views["head.coarse_w"] + views["head.coarse_b"]
    fine = emb @ views["head.fine_w"] + views["head.fine_b"]
    return coarse, fine
