"""The translation network: shared text encoder, a controller network that
generates per-target-language parameters for the visual-prompt mapping,
per-modality self-fusion layers, text-queries-vision co-attention, and a
Transformer decoder with the output projection tied to the embedding table.

One shared model serves every translation direction; the target language
enters twice through the same embedding row, as the tag prefixed to the
source sequence and as the controller input that conditions the visual
prompts.

Variants (ablation switches):
    full      controller-generated mapping of visual tokens (the method)
    static    same affine mapping, but with ordinary learned parameters
              shared across target languages
    no_lvpg   visual tokens pass through a fixed learned projection and
              feed co-attention directly
    text_only vision path skipped entirely; the decoder attends to the
              encoder output
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import (ConfigError, FormatError, ShapeError, VariantError)
from .seeding import derive_seed, rng_for
from .text import BOS_ID, PAD_ID
from .vision import VisualTokens

VARIANTS = ("full", "no_lvpg", "static", "text_only")

CKPT_MAGIC = b"LVPM"
CKPT_VERSION = 1

_NEG_INF = -1e9


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 96
    n_heads: int = 4
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    d_ffn: int = 0          # 0 -> 4 * d_model
    d_v: int = 0            # visual feature width; may be 0 for text_only
    d_ctrl: int = 0         # 0 -> d_model
    n_coattn_layers: int = 1
    variant: str = "full"
    dropout: float = 0.3
    eps_ls: float = 0.1

    def __post_init__(self):
        if self.d_ffn == 0:
            self.d_ffn = 4 * self.d_model
        if self.d_ctrl == 0:
            self.d_ctrl = self.d_model
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}, "
                              f"expected one of {VARIANTS}")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model={self.d_model} not divisible by "
                              f"n_heads={self.n_heads}")
        if self.variant != "text_only" and self.d_v <= 0:
            raise ConfigError(f"variant {self.variant!r} requires d_v > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def sinusoidal_positions(n: int, d: int, dtype=np.float32) -> np.ndarray:
    pos = np.arange(n, dtype=np.float64)[:, None]
    dim = np.arange((d + 1) // 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, 2.0 * dim / d)
    out = np.zeros((n, d), dtype=np.float64)
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles[:, :d // 2])
    return out.astype(dtype)


class MultimodalTranslator:
    """Parameter store plus the forward passes of every variant."""

    def __init__(self, config: ModelConfig, seed: int = 0, dtype=None):
        self.config = config
        self.dtype = np.dtype(dtype or ad.default_dtype()).type
        self.train_mode = False
        self._rng = rng_for("dropout", seed)
        self.params: dict[str, Tensor] = {}
        self._init_params(rng_for("init", seed))

    # -- parameter construction ------------------------------------------

    def _param(self, name: str, data: np.ndarray):
        self.params[name] = Tensor(np.asarray(data, dtype=self.dtype),
                                   requires_grad=True, dtype=self.dtype)

    def _affine(self, rng, name: str, d_in: int, d_out: int, scale=1.0):
        bound = scale / np.sqrt(d_in)
        self._param(f"{name}.w", rng.uniform(-bound, bound, (d_in, d_out)))
        self._param(f"{name}.b", np.zeros(d_out))

    def _layer_params(self, rng, prefix: str, cross: bool = False):
        d, d_ffn = self.config.d_model, self.config.d_ffn
        for proj in ("q", "k", "v", "o"):
            self._affine(rng, f"{prefix}.self.{proj}", d, d)
        self._param(f"{prefix}.ln1.gain", np.ones(d))
        self._param(f"{prefix}.ln1.bias", np.zeros(d))
        if cross:
            for proj in ("q", "k", "v", "o"):
                self._affine(rng, f"{prefix}.cross.{proj}", d, d)
            self._param(f"{prefix}.ln2.gain", np.ones(d))
            self._param(f"{prefix}.ln2.bias", np.zeros(d))
        self._affine(rng, f"{prefix}.ffn.1", d, d_ffn)
        self._affine(rng, f"{prefix}.ffn.2", d_ffn, d)
        last = "ln3" if cross else "ln2"
        self._param(f"{prefix}.{last}.gain", np.ones(d))
        self._param(f"{prefix}.{last}.bias", np.zeros(d))

    def _init_params(self, rng):
        cfg = self.config
        d, d_v = cfg.d_model, cfg.d_v
        self._param("embedding",
                    rng.standard_normal((cfg.vocab_size, d)) / np.sqrt(d))
        for i in range(cfg.n_enc_layers):
            self._layer_params(rng, f"enc.{i}")
        for i in range(cfg.n_dec_layers):
            self._layer_params(rng, f"dec.{i}", cross=True)

        if cfg.variant == "full":
            theta_len = d_v * d + d
            self._affine(rng, "ctrl.1", d, cfg.d_ctrl)
            # output layer starts near zero with an identity-leaning bias, so
            # initial prompts are a mild fixed projection of the visual
            # tokens and the language conditioning grows from small
            self._affine(rng, "ctrl.2", cfg.d_ctrl, theta_len, scale=0.01)
            bias = np.concatenate([np.eye(d_v, d).reshape(-1), np.zeros(d)])
            self.params["ctrl.2.b"] = Tensor(bias.astype(self.dtype),
                                             requires_grad=True,
                                             dtype=self.dtype)
        elif cfg.variant == "static":
            self._affine(rng, "static", d_v, d)
        elif cfg.variant == "no_lvpg":
            self._affine(rng, "visproj", d_v, d)
        if cfg.variant in ("full", "static", "no_lvpg"):
            self._layer_params(rng, "fuse_text")
            self._layer_params(rng, "fuse_vis")
            for j in range(cfg.n_coattn_layers):
                self._layer_params(rng, f"coattn.{j}")

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def astype(self, dtype) -> "MultimodalTranslator":
        """A copy with parameters cast to ``dtype`` (for gradient checks)."""
        clone = MultimodalTranslator(self.config, dtype=dtype)
        for name, p in self.params.items():
            clone.params[name] = Tensor(p.data.astype(dtype),
                                        requires_grad=True, dtype=dtype)
        return clone

    def set_dropout_rng(self, rng: np.random.Generator):
        self._rng = rng

    # -- building blocks ---------------------------------------------------

    def _const(self, data) -> Tensor:
        return Tensor(np.asarray(data, dtype=self.dtype), dtype=self.dtype)

    def _dropout(self, x: Tensor) -> Tensor:
        return ad.dropout(x, self.config.dropout, self._rng, self.train_mode)

    def _lin(self, prefix: str, x: Tensor) -> Tensor:
        return ad.linear(x, self.params[f"{prefix}.w"], self.params[f"{prefix}.b"])

    def _ln(self, prefix: str, x: Tensor) -> Tensor:
        return ad.layer_norm(x, self.params[f"{prefix}.gain"],
                             self.params[f"{prefix}.bias"])

    def _split_heads(self, x: Tensor) -> tuple[Tensor, tuple]:
        """lead + (n, d) -> lead + (heads, n, head_dim); lead is () or (B,)."""
        h = self.config.n_heads
        c = self.config.d_model // h
        lead = x.shape[:-2]
        n = x.shape[-2]
        split = ad.reshape(x, lead + (n, h, c))
        perm = tuple(range(len(lead))) + (len(lead) + 1, len(lead),
                                          len(lead) + 2)
        return ad.transpose(split, perm), perm

    def _mha(self, prefix: str, query: Tensor, memory: Tensor,
             key_mask: Optional[np.ndarray] = None,
             causal: bool = False) -> Tensor:
        """Multi-head attention over lead+(n, d) queries; ``key_mask`` marks
        key positions (True) no query may attend to. Queries may carry one
        leading batch dimension; the memory is shared across it."""
        d = self.config.d_model
        c = d // self.config.n_heads
        lead = query.shape[:-2]
        n, m = query.shape[-2], memory.shape[-2]
        qh, perm = self._split_heads(self._lin(f"{prefix}.q", query))
        kh, _ = self._split_heads(self._lin(f"{prefix}.k", memory))
        vh, _ = self._split_heads(self._lin(f"{prefix}.v", memory))
        scores = ad.scale(ad.matmul(qh, ad.transpose(kh)), 1.0 / np.sqrt(c))
        bias = np.zeros((n, m), dtype=self.dtype)
        if causal:
            bias += np.triu(np.full((n, m), _NEG_INF, dtype=self.dtype), k=1)
        if key_mask is not None and key_mask.any():
            bias += np.where(key_mask, _NEG_INF, 0.0).astype(self.dtype)[None, :]
        if bias.any():
            scores = ad.add(scores, self._const(bias))
        probs = self._dropout(ad.softmax(scores, axis=-1))
        ctx = ad.matmul(probs, vh)
        merged = ad.reshape(ad.transpose(ctx, perm), lead + (n, d))
        return self._lin(f"{prefix}.o", merged)

    def _ffn(self, prefix: str, x: Tensor) -> Tensor:
        h = self._dropout(ad.relu(self._lin(f"{prefix}.1", x)))
        return self._lin(f"{prefix}.2", h)

    def _encoder_layer(self, prefix: str, x: Tensor,
                       key_mask: Optional[np.ndarray]) -> Tensor:
        a = self._mha(f"{prefix}.self", x, x, key_mask=key_mask)
        x = self._ln(f"{prefix}.ln1", ad.add(x, self._dropout(a)))
        f = self._ffn(f"{prefix}.ffn", x)
        return self._ln(f"{prefix}.ln2", ad.add(x, self._dropout(f)))

    def _embed(self, ids) -> Tensor:
        ids = np.asarray(ids, dtype=np.int64)
        d = self.config.d_model
        x = ad.scale(ad.embedding_lookup(self.params["embedding"], ids),
                     np.sqrt(d))
        pos = self._const(sinusoidal_positions(ids.shape[-1], d, self.dtype))
        return self._dropout(ad.add(x, pos))

    # -- public forward stages ----------------------------------------------

    def encode_source(self, source_ids: Sequence[int]) -> Tensor:
        """Run the tagged source sequence through the Transformer encoder.
        PAD positions are masked out of every attention distribution."""
        if len(source_ids) == 0:
            raise ShapeError("encode_source: empty source sequence")
        ids = np.asarray(source_ids, dtype=np.int64)
        key_mask = ids == PAD_ID
        x = self._embed(ids)
        for i in range(self.config.n_enc_layers):
            x = self._encoder_layer(f"enc.{i}", x, key_mask)
        return x

    def controller_forward(self, tag_id: int) -> tuple[Tensor, Tensor]:
        """Generate the mapping parameters for one target language from its
        tag embedding: two affine layers with ReLU, output split into a
        [d_v, d_model] weight and a [d_model] bias (both graph nodes)."""
        if self.config.variant != "full":
            raise VariantError("controller_forward requires the 'full' "
                               f"variant, model is {self.config.variant!r}")
        d, d_v = self.config.d_model, self.config.d_v
        t = ad.embedding_lookup(self.params["embedding"], [int(tag_id)])
        h = ad.relu(self._lin("ctrl.1", t))
        flat = self._lin("ctrl.2", h)
        w = ad.reshape(ad.narrow(flat, 1, 0, d_v * d), (d_v, d))
        b = ad.reshape(ad.narrow(flat, 1, d_v * d, d), (d,))
        return w, b

    def apply_mapping(self, v: Tensor, theta: tuple[Tensor, Tensor]) -> Tensor:
        """Map visual tokens through the generated affine parameters."""
        w, b = theta
        if v.shape[-1] != w.shape[0]:
            raise ShapeError(f"apply_mapping: visual width {v.shape[-1]} vs "
                             f"mapping input {w.shape[0]}")
        return ad.linear(v, w, b)

    def static_mapping(self, v: Tensor) -> Tensor:
        if self.config.variant != "static":
            raise VariantError("static_mapping requires the 'static' variant, "
                               f"model is {self.config.variant!r}")
        return self._lin("static", v)

    def visual_prompt(self, visual: VisualTokens, tag_id: int) -> Tensor:
        """Variant dispatch from raw visual tokens to the prompt sequence."""
        v = self._const(visual.tokens)
        variant = self.config.variant
        if variant == "full":
            return self.apply_mapping(v, self.controller_forward(tag_id))
        if variant == "static":
            return self.static_mapping(v)
        if variant == "no_lvpg":
            return self._lin("visproj", v)
        raise VariantError("text_only variant has no visual prompts")

    def self_fuse(self, s0: Tensor, p0: Tensor,
                  src_key_mask: Optional[np.ndarray] = None
                  ) -> tuple[Tensor, Tensor]:
        """One self-attention layer per modality, text and prompts fused
        independently; shapes are preserved."""
        if s0.shape[0] == 0 or p0.shape[0] == 0:
            raise ShapeError("self_fuse: empty stream")
        s = self._encoder_layer("fuse_text", s0, src_key_mask)
        p = self._encoder_layer("fuse_vis", p0, None)
        return s, p

    def co_attention(self, s: Tensor, p: Tensor) -> Tensor:
        """Vision-guided tokens: text as query, prompts as key/value, then
        the usual residual/norm/FFN trailer. Output keeps the text length."""
        if self.config.variant == "text_only":
            raise VariantError("co_attention unavailable under text_only")
        if p.shape[0] == 0:
            raise ShapeError("co_attention: empty prompt sequence")
        q = s
        for j in range(self.config.n_coattn_layers):
            prefix = f"coattn.{j}"
            a = self._mha(f"{prefix}.self", q, p)
            q = self._ln(f"{prefix}.ln1", ad.add(q, self._dropout(a)))
            f = self._ffn(f"{prefix}.ffn", q)
            q = self._ln(f"{prefix}.ln2", ad.add(q, self._dropout(f)))
        return q

    def prepare_source(self, source_ids: Sequence[int],
                       visual: Optional[VisualTokens]
                       ) -> tuple[Tensor, np.ndarray]:
        """Everything up to the decoder: returns the cross-attention memory
        and the source key mask, per the configured variant."""
        ids = np.asarray(source_ids, dtype=np.int64)
        key_mask = ids == PAD_ID
        s0 = self.encode_source(source_ids)
        if self.config.variant == "text_only":
            return s0, key_mask
        if visual is None:
            raise ConfigError(f"variant {self.config.variant!r} requires "
                              "visual tokens, none provided")
        p0 = self.visual_prompt(visual, int(source_ids[0]))
        s, p = self.self_fuse(s0, p0, key_mask)
        return self.co_attention(s, p), key_mask

    def decode(self, memory: Tensor, input_ids,
               src_key_mask: Optional[np.ndarray] = None) -> Tensor:
        """Teacher-forcing decoder pass over already-shifted inputs.

        ``input_ids`` is the BOS-led prefix; row t of the returned
        [T, vocab] logits scores the token following position t and sees
        only positions <= t of the input. A [B, T] id matrix decodes a
        batch of prefixes over the shared memory, returning [B, T, vocab].
        """
        x = self._embed(input_ids)
        for i in range(self.config.n_dec_layers):
            prefix = f"dec.{i}"
            a = self._mha(f"{prefix}.self", x, x, causal=True)
            x = self._ln(f"{prefix}.ln1", ad.add(x, self._dropout(a)))
            a = self._mha(f"{prefix}.cross", x, memory, key_mask=src_key_mask)
            x = self._ln(f"{prefix}.ln2", ad.add(x, self._dropout(a)))
            f = self._ffn(f"{prefix}.ffn", x)
            x = self._ln(f"{prefix}.ln3", ad.add(x, self._dropout(f)))
        return ad.matmul(x, ad.transpose(self.params["embedding"]))

    def forward_example(self, example, visual: Optional[VisualTokens]
                        ) -> tuple[Tensor, int]:
        """Summed label-smoothed cross entropy and token count for one
        (direction, sentence) pair."""
        if example.target_ids[0] != BOS_ID:
            raise ConfigError(f"example {example.example_id}: target must "
                              "begin with BOS")
        memory, key_mask = self.prepare_source(example.source_ids, visual)
        logits = self.decode(memory, example.target_ids[:-1], key_mask)
        labels = example.target_ids[1:]
        loss_sum = ad.cross_entropy_label_smoothed(
            logits, labels, self.config.eps_ls, PAD_ID, reduction="sum")
        return loss_sum, len(labels)

    def forward_loss(self, batch,
                     visual_map: Optional[Mapping[str, VisualTokens]] = None
                     ) -> Tensor:
        """Mean label-smoothed cross entropy over all non-pad target tokens
        of a batch; directions may be mixed freely."""
        total = None
        count = 0
        for ex in batch.examples:
            visual = self._lookup_visual(ex, visual_map)
            loss_sum, n = self.forward_example(ex, visual)
            total = loss_sum if total is None else ad.add(total, loss_sum)
            count += n
        if total is None:
            raise ConfigError("forward_loss: empty batch")
        return ad.scale(total, 1.0 / count)

    def _lookup_visual(self, example, visual_map):
        if self.config.variant == "text_only":
            return None
        if visual_map is None or example.image_id not in visual_map:
            raise ConfigError(f"no visual tokens for image {example.image_id!r} "
                              f"(required by variant {self.config.variant!r})")
        return visual_map[example.image_id]

    def next_token_logprobs(self, memory: Tensor, prefix_ids: Sequence[int],
                            src_key_mask: Optional[np.ndarray] = None
                            ) -> np.ndarray:
        """Log-softmax over the next token given a decoded prefix (no graph)."""
        logits = self.decode(memory, prefix_ids, src_key_mask).data[-1]
        shifted = logits - logits.max()
        return shifted - np.log(np.exp(shifted).sum())

    def next_token_logprobs_batch(self, memory: Tensor, prefix_ids,
                                  src_key_mask: Optional[np.ndarray] = None
                                  ) -> np.ndarray:
        """[B, V] next-token log-softmax for equal-length prefixes sharing
        one source."""
        logits = self.decode(memory, np.asarray(prefix_ids),
                             src_key_mask).data[:, -1, :]
        shifted = logits - logits.max(axis=-1, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def check_model_gradients(model: MultimodalTranslator, batch,
                          visual_map: Optional[Mapping[str, VisualTokens]],
                          h: float = 1e-4, tol: float = 1e-3,
                          max_entries: int = 8, seed: int = 0
                          ) -> list[ad.GradCheckReport]:
    """Finite-difference check of the composed loss against every parameter.

    The model is recast to float64 and run in eval mode; for each parameter
    a seeded sample of ``max_entries`` coordinates is perturbed. Covers the
    whole path, including loss -> co-attention -> prompts -> generated
    parameters -> controller weights under the full variant.
    """
    model64 = model.astype(np.float64)
    model64.train_mode = False
    reports = []
    for name in model64.params:
        def f(x, _name=name):
            saved = model64.params[_name]
            model64.params[_name] = x
            try:
                return model64.forward_loss(batch, visual_map)
            finally:
                model64.params[_name] = saved

        reports.append(ad.grad_check(
            f, model64.params[name], h=h, tol=tol, max_entries=max_entries,
            seed=derive_seed(seed, name), name=name))
    return reports


# ---------------------------------------------------------------------------
# checkpoint format
# ---------------------------------------------------------------------------

def save_checkpoint(path: str | Path, model: MultimodalTranslator,
                    train_state: Optional[dict] = None):
    """Write config + parameters (and optionally optimizer state) to disk.

    Layout: magic "LVPM", version u32, config JSON (u32 length prefix),
    param count u32, then per parameter: name (u16 length + utf-8), ndim u8,
    dims u32 each, float32 data little-endian. A trailing flag byte marks an
    optional optimizer section: step u64, seed u64, trainer-config JSON,
    then first/second moments in parameter order.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(model.params)
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        cfg = json.dumps(model.config.to_dict()).encode("utf-8")
        f.write(struct.pack("<II", CKPT_VERSION, len(cfg)))
        f.write(cfg)
        f.write(struct.pack("<I", len(names)))
        for name in names:
            data = model.params[name].data.astype("<f4")
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", data.ndim))
            f.write(struct.pack(f"<{data.ndim}I", *data.shape))
            f.write(data.tobytes())
        if train_state is None:
            f.write(struct.pack("<B", 0))
        else:
            f.write(struct.pack("<B", 1))
            f.write(struct.pack("<QQ", train_state["step"], train_state["seed"]))
            tcfg = json.dumps(train_state["config"]).encode("utf-8")
            f.write(struct.pack("<I", len(tcfg)))
            f.write(tcfg)
            for section in ("m", "v"):
                for name in names:
                    f.write(np.ascontiguousarray(
                        train_state[section][name], dtype="<f4").tobytes())


def load_checkpoint(path: str | Path
                    ) -> tuple[MultimodalTranslator, Optional[dict]]:
    """Rebuild a model (and optimizer state, if stored) from a checkpoint."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    offset = 0

    def take(n, what):
        nonlocal offset
        if offset + n > len(data):
            raise FormatError(f"{path}: truncated while reading {what}",
                              offset=offset)
        chunk = data[offset:offset + n]
        offset += n
        return chunk

    if take(4, "magic") != CKPT_MAGIC:
        raise FormatError(f"{path}: bad magic, not a checkpoint", offset=0)
    version, cfg_len = struct.unpack("<II", take(8, "header"))
    if version != CKPT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}", offset=4)
    config = ModelConfig.from_dict(json.loads(take(cfg_len, "config")))
    model = MultimodalTranslator(config)

    (n_params,) = struct.unpack("<I", take(4, "parameter count"))
    blobs: dict[str, np.ndarray] = {}
    for i in range(n_params):
        (name_len,) = struct.unpack("<H", take(2, f"name length {i}"))
        name = take(name_len, f"name {i}").decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1, f"ndim of {name}"))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim, f"shape of {name}"))
        n_items = int(np.prod(shape, dtype=np.int64))
        raw = take(4 * n_items, f"data of {name}")
        blobs[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    load_parameters(model, blobs)

    (has_state,) = struct.unpack("<B", take(1, "optimizer flag"))
    state = None
    if has_state:
        step, seed = struct.unpack("<QQ", take(16, "step/seed"))
        (tcfg_len,) = struct.unpack("<I", take(4, "trainer config length"))
        tcfg = json.loads(take(tcfg_len, "trainer config"))
        state = {"step": step, "seed": seed, "config": tcfg, "m": {}, "v": {}}
        for section in ("m", "v"):
            for name in model.params:
                shape = model.params[name].shape
                raw = take(4 * model.params[name].size,
                           f"{section} moment of {name}")
                state[section][name] = np.frombuffer(raw, dtype="<f4") \
                    .reshape(shape).copy()
    if offset != len(data):
        raise FormatError(f"{path}: trailing bytes", offset=offset)
    return model, state


def load_parameters(model: MultimodalTranslator,
                    blobs: Mapping[str, np.ndarray]):
    """Copy named arrays into the model, rejecting any name/shape mismatch."""
    missing = set(model.params) - set(blobs)
    extra = set(blobs) - set(model.params)
    if missing or extra:
        raise ConfigError(f"parameter names do not match checkpoint "
                          f"(missing {sorted(missing)}, extra {sorted(extra)})")
    for name, arr in blobs.items():
        if tuple(arr.shape) != model.params[name].shape:
            raise ConfigError(f"shape mismatch for {name}: checkpoint "
                              f"{arr.shape} vs model {model.params[name].shape}")
        model.params[name].data = arr.astype(model.dtype)
