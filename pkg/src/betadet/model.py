"""Toy query-based detector: patch embedding, one pre-norm self-attention
encoder block, learnable object queries, two decoder blocks, and shared
per-layer heads for objectness, box, and Beta maturity parameters.

This stack is a deliberate desk-scale stand-in for a full real-time
detection transformer; the pieces under test (the probabilistic maturity
head, the matcher, the composite loss) are preserved exactly. Heads are
shared across decoder layers; every layer's detections are supervised
(deep supervision). All randomness comes from the package RNG, so
identical seeds give bit-identical parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .betadist import BetaParams
from .geometry import BoxCXCYWH
from .rng import Xoshiro256

_OBJ_BIAS_INIT = -2.0
_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelConfig:
    image_size: int = 64
    patch: int = 8
    embed_dim: int = 64
    heads: int = 4
    num_queries: int = 12
    decoder_layers: int = 2
    mlp_ratio: int = 2

    def __post_init__(self):
        if self.image_size % self.patch != 0:
            raise ValueError("image_size must be divisible by patch")
        if self.embed_dim % self.heads != 0:
            raise ValueError("embed_dim must be divisible by heads")
        if self.embed_dim % 4 != 0:
            raise ValueError("embed_dim must be divisible by 4 for 2-D positions")

    @property
    def grid(self) -> int:
        return self.image_size // self.patch

    @property
    def tokens(self) -> int:
        return self.grid * self.grid

    @property
    def patch_dim(self) -> int:
        return self.patch * self.patch * 3

    @property
    def mlp_hidden(self) -> int:
        return self.mlp_ratio * self.embed_dim


@dataclass(frozen=True)
class Detection:
    """One query's prediction: box, objectness, maturity distribution."""

    box: BoxCXCYWH
    p_obj: float
    maturity: BetaParams

    def __post_init__(self):
        if not (0.0 < self.p_obj < 1.0):
            raise ValueError(f"p_obj must be in (0, 1), got {self.p_obj}")


@dataclass(frozen=True)
class HeadRawOutput:
    """Unconstrained pre-activations of the maturity head."""

    y_hat_alpha: float
    y_hat_beta: float


def head_transform(raw: HeadRawOutput) -> BetaParams:
    """softplus(raw) + 0.5 on both channels; the stable-shape floor."""
    def sp(x: float) -> float:
        return max(x, 0.0) + math.log1p(math.exp(-abs(x)))

    return BetaParams(sp(raw.y_hat_alpha) + 0.5, sp(raw.y_hat_beta) + 0.5)


@dataclass
class LayerOutput:
    """One decoder layer's predictions over a batch, as graph tensors."""

    boxes: ag.Tensor   # (B, Q, 4) cxcywh in (0, 1)
    p_obj: ag.Tensor   # (B, Q) in (0, 1)
    alpha: ag.Tensor   # (B, Q) >= 0.5
    beta: ag.Tensor    # (B, Q) >= 0.5


def position_encoding(points: np.ndarray, grid: int, dim: int) -> np.ndarray:
    """Fixed 2-D sine/cosine embedding of (N, 2) points in grid units.

    Half the channels encode the x coordinate, half the y coordinate;
    each half is [sin(p*f_i), cos(p*f_i)] with f_i = 10000^(-2i/half).
    Token positions use integer grid coordinates; query anchors use
    fractional coordinates on the same scale so query/key dot products
    peak where locations agree.
    """
    half = dim // 2
    quarter = half // 2
    freqs = 1.0 / (10000.0 ** (2.0 * np.arange(quarter) / half))
    out = np.zeros((points.shape[0], dim), dtype=np.float64)
    for axis in (0, 1):
        ang = points[:, axis:axis + 1] * freqs[None, :]
        emb = np.concatenate([np.sin(ang), np.cos(ang)], axis=1)
        out[:, axis * half:(axis + 1) * half] = emb
    return out


def sinusoidal_positions(grid: int, dim: int) -> np.ndarray:
    """Token position embedding for the full grid -> (grid^2, dim)."""
    pts = np.array([[gx, gy] for gy in range(grid) for gx in range(grid)],
                   dtype=np.float64)
    return position_encoding(pts, grid, dim)


def anchor_points(n_queries: int) -> np.ndarray:
    """(Q, 2) anchor centers in normalized image coordinates.

    Centers tile the image on a ceil(sqrt(Q))-column grid so each query
    starts owning a region.
    """
    cols = math.ceil(math.sqrt(n_queries))
    rows = math.ceil(n_queries / cols)
    pts = []
    for k in range(n_queries):
        pts.append([(k % cols + 0.5) / cols, (k // cols + 0.5) / rows])
    return np.array(pts, dtype=np.float64)


#: Anchor box extent in normalized units (mid-range object size).
ANCHOR_SIZE = 0.22


def query_anchors(n_queries: int, grid: int, dim: int) -> np.ndarray:
    """Spatial anchor encodings used to initialize the learnable queries."""
    return position_encoding(anchor_points(n_queries) * (grid - 1), grid, dim)


def patchify(images: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """(B, S, S, 3) -> (B, tokens, patch_dim), grid row-major, pixels
    row-major within each patch, channels last."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 3:
        images = images[None]
    b = images.shape[0]
    g, p = cfg.grid, cfg.patch
    if images.shape[1:] != (cfg.image_size, cfg.image_size, 3):
        raise ValueError(
            f"expected images of shape (*, {cfg.image_size}, {cfg.image_size}, 3), "
            f"got {images.shape}")
    x = images.reshape(b, g, p, g, p, 3)
    x = x.transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(b, g * g, p * p * 3)


class Detector:
    """Parameter container plus the forward pass."""

    def __init__(self, cfg: ModelConfig, params: dict[str, ag.Tensor]):
        self.cfg = cfg
        self.params = params
        self._pos = sinusoidal_positions(cfg.grid, cfg.embed_dim)
        # Box head output is a sigmoid-space residual from these anchors.
        pts = anchor_points(cfg.num_queries)
        anchors = np.concatenate(
            [pts, np.full((cfg.num_queries, 2), ANCHOR_SIZE)], axis=1)
        self._anchor_logits = np.log(anchors / (1.0 - anchors))

    # -- construction -------------------------------------------------------

    @classmethod
    def init(cls, cfg: ModelConfig, seed: int) -> "Detector":
        """Fresh parameters from the documented RNG.

        Linear weights are uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)],
        filled in C order in a fixed parameter order; biases are zero
        except the objectness head bias (-2.0 so early training is not
        dominated by negative VFL terms). Layernorm is gain 1, shift 0.
        """
        rng = Xoshiro256(seed)
        params: dict[str, ag.Tensor] = {}

        def weight(name: str, fan_in: int, fan_out: int):
            bound = 1.0 / math.sqrt(fan_in)
            vals = [rng.uniform_in(-bound, bound) for _ in range(fan_in * fan_out)]
            params[name] = ag.Tensor(
                np.array(vals).reshape(fan_in, fan_out), requires_grad=True)

        def bias(name: str, n: int, value: float = 0.0):
            params[name] = ag.Tensor(np.full(n, value), requires_grad=True)

        def layernorm_params(prefix: str, n: int):
            params[f"{prefix}.g"] = ag.Tensor(np.ones(n), requires_grad=True)
            params[f"{prefix}.b"] = ag.Tensor(np.zeros(n), requires_grad=True)

        def attention(prefix: str, d: int):
            for part in ("q", "k", "v", "o"):
                weight(f"{prefix}.w{part}", d, d)
                bias(f"{prefix}.b{part}", d)

        def mlp(prefix: str, d_in: int, d_hidden: int, d_out: int,
                out_bias: float = 0.0):
            weight(f"{prefix}.w1", d_in, d_hidden)
            bias(f"{prefix}.b1", d_hidden)
            weight(f"{prefix}.w2", d_hidden, d_out)
            bias(f"{prefix}.b2", d_out, out_bias)

        d = cfg.embed_dim
        weight("embed.w", cfg.patch_dim, d)
        bias("embed.b", d)
        layernorm_params("enc.ln1", d)
        attention("enc.attn", d)
        layernorm_params("enc.ln2", d)
        mlp("enc.mlp", d, cfg.mlp_hidden, d)
        layernorm_params("enc.out_ln", d)

        params["queries"] = ag.Tensor(
            query_anchors(cfg.num_queries, cfg.grid, d), requires_grad=True)

        for l in range(cfg.decoder_layers):
            layernorm_params(f"dec{l}.ln1", d)
            attention(f"dec{l}.self", d)
            layernorm_params(f"dec{l}.ln2", d)
            attention(f"dec{l}.cross", d)
            layernorm_params(f"dec{l}.ln3", d)
            mlp(f"dec{l}.mlp", d, cfg.mlp_hidden, d)

        layernorm_params("head.ln", d)
        weight("head.obj.w", d, 1)
        bias("head.obj.b", 1, _OBJ_BIAS_INIT)
        mlp("head.box", d, d, 4)
        mlp("head.mat", d, d, 2)
        return cls(cfg, params)

    @staticmethod
    def param_count(cfg: ModelConfig) -> int:
        """Closed-form parameter count for a given configuration."""
        d = cfg.embed_dim
        h = cfg.mlp_hidden
        ln = 2 * d
        attn = 4 * (d * d + d)
        block_mlp = d * h + h + h * d + d
        embed = cfg.patch_dim * d + d
        encoder = 2 * ln + attn + block_mlp + ln  # ln1, ln2, attn, mlp, out_ln
        queries = cfg.num_queries * d
        decoder = cfg.decoder_layers * (3 * ln + 2 * attn + block_mlp)
        heads = (
            ln                      # shared pre-head layernorm
            + (d * 1 + 1)           # objectness linear
            + (d * d + d + d * 4 + 4)   # box MLP
            + (d * d + d + d * 2 + 2)   # maturity MLP
        )
        return embed + encoder + queries + decoder + heads

    def parameters(self) -> list[ag.Tensor]:
        """Parameters in fixed (creation) order."""
        return list(self.params.values())

    def parameter_names(self) -> list[str]:
        return list(self.params.keys())

    # -- forward pass --------------------------------------------------------

    def _attend(self, prefix: str, x_q: ag.Tensor, x_kv: ag.Tensor,
                q_pos=None, k_pos=None) -> ag.Tensor:
        """Multi-head attention; positional terms are added to the query
        and key inputs only (values carry content alone)."""
        p = self.params
        cfg = self.cfg
        heads, dh = cfg.heads, cfg.embed_dim // cfg.heads
        b, tq = x_q.shape[0], x_q.shape[1]
        tk = x_kv.shape[1]

        def split(t: ag.Tensor, tl: int) -> ag.Tensor:
            t = ag.reshape(t, (b, tl, heads, dh))
            return ag.transpose(t, (0, 2, 1, 3))

        q_in = x_q if q_pos is None else x_q + q_pos
        k_in = x_kv if k_pos is None else x_kv + k_pos
        q = split(ag.linear(q_in, p[f"{prefix}.wq"], p[f"{prefix}.bq"]), tq)
        k = split(ag.linear(k_in, p[f"{prefix}.wk"], p[f"{prefix}.bk"]), tk)
        v = split(ag.linear(x_kv, p[f"{prefix}.wv"], p[f"{prefix}.bv"]), tk)
        scores = (q @ ag.transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(dh))
        mix = ag.softmax(scores) @ v
        mix = ag.reshape(ag.transpose(mix, (0, 2, 1, 3)), (b, tq, cfg.embed_dim))
        return ag.linear(mix, p[f"{prefix}.wo"], p[f"{prefix}.bo"])

    def _mlp(self, prefix: str, x: ag.Tensor) -> ag.Tensor:
        p = self.params
        return ag.linear(ag.relu(ag.linear(x, p[f"{prefix}.w1"], p[f"{prefix}.b1"])),
                         p[f"{prefix}.w2"], p[f"{prefix}.b2"])

    def _ln(self, prefix: str, x: ag.Tensor) -> ag.Tensor:
        return ag.layernorm(x, self.params[f"{prefix}.g"], self.params[f"{prefix}.b"])

    def forward(self, images: np.ndarray) -> list[LayerOutput]:
        """Run the detector; returns one LayerOutput per decoder layer,
        the last being the final prediction.

        Token/query positional encodings enter every attention through
        the query/key inputs; the decoder state starts at zero with the
        learnable queries serving as its positional embedding."""
        p = self.params
        cfg = self.cfg
        tokens = patchify(images, cfg)
        b = tokens.shape[0]
        pos = ag.Tensor(self._pos)

        # Position enters the residual stream here (so attended values
        # carry their location) and the attention addressing below.
        x = ag.linear(ag.Tensor(tokens), p["embed.w"], p["embed.b"]) + pos
        xn = self._ln("enc.ln1", x)
        x = x + self._attend("enc.attn", xn, xn, q_pos=pos, k_pos=pos)
        x = x + self._mlp("enc.mlp", self._ln("enc.ln2", x))
        memory = self._ln("enc.out_ln", x)

        q = ag.Tensor(np.zeros((b, cfg.num_queries, cfg.embed_dim)))
        qpos = p["queries"]
        outputs: list[LayerOutput] = []
        for l in range(cfg.decoder_layers):
            qn = self._ln(f"dec{l}.ln1", q)
            q = q + self._attend(f"dec{l}.self", qn, qn, q_pos=qpos, k_pos=qpos)
            q = q + self._attend(f"dec{l}.cross", self._ln(f"dec{l}.ln2", q),
                                 memory, q_pos=qpos, k_pos=pos)
            q = q + self._mlp(f"dec{l}.mlp", self._ln(f"dec{l}.ln3", q))

            h = self._ln("head.ln", q)
            obj = ag.sigmoid(ag.linear(h, p["head.obj.w"], p["head.obj.b"]))
            boxes = ag.sigmoid(self._mlp("head.box", h) + self._anchor_logits)
            mat = ag.softplus(self._mlp("head.mat", h)) + 0.5
            outputs.append(LayerOutput(
                boxes=boxes,
                p_obj=obj[:, :, 0],
                alpha=mat[:, :, 0],
                beta=mat[:, :, 1],
            ))
        return outputs


def detections(layer: LayerOutput, image_index: int) -> list[Detection]:
    """Materialize one image's predictions from a layer output.

    Saturated sigmoid outputs are nudged into the open interval so the
    Detection invariants hold even in pathological parameter states.
    """
    boxes = layer.boxes.data[image_index]
    p_obj = layer.p_obj.data[image_index]
    alpha = layer.alpha.data[image_index]
    beta = layer.beta.data[image_index]
    out = []
    for k in range(boxes.shape[0]):
        cx, cy, w, h = boxes[k]
        out.append(Detection(
            box=BoxCXCYWH(float(cx), float(cy),
                          float(max(w, _PROB_FLOOR)), float(max(h, _PROB_FLOOR))),
            p_obj=float(min(max(p_obj[k], _PROB_FLOOR), 1.0 - _PROB_FLOOR)),
            maturity=BetaParams(float(alpha[k]), float(beta[k])),
        ))
    return out
