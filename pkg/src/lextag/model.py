"""The full network: transformer encoder, match denoiser, fusion, tagger.

The lexicon side is pluggable: with no match candidates (or none surviving
selection) the forward pass literally runs the plain encoder+tagger code,
so outputs are bitwise equal to the baseline.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import tensor as T
from .matching import MatchSet
from .tensor import AttentionParams, Tensor

FUSION_MODES = ("hard", "soft")


@dataclass
class ModelConfig:
    subword_vocab_size: int
    tag_vocab_size: int
    label_vocab_size: int
    hz: int = 64
    encoder_layers: int = 2
    head_count: int = 4
    max_seq_length: int = 128
    dict_candidate: int = 16
    top_n: Optional[int] = 1
    fusion_mode: str = "hard"
    hard_threshold: float = 0.5
    loss_weight_denoise: float = 1.0
    dropout_rate: float = 0.1
    sigmoid_tagger: bool = False
    use_first: bool = True

    def __post_init__(self):
        if self.hz % self.head_count != 0:
            raise ValueError(f"hz {self.hz} not divisible by head_count {self.head_count}")
        if not 0.0 < self.hard_threshold < 1.0:
            raise ValueError(f"hard_threshold must lie in (0,1), got {self.hard_threshold}")
        if self.max_seq_length < 2:
            raise ValueError("max_seq_length must fit both sentinels")
        if self.fusion_mode not in FUSION_MODES:
            raise ValueError(f"fusion_mode must be one of {FUSION_MODES}")
        if self.top_n is not None and self.top_n < 1:
            raise ValueError("top_n must be None or >= 1")
        if self.dict_candidate < 1:
            raise ValueError("dict_candidate must be >= 1")
        if self.loss_weight_denoise < 0:
            raise ValueError("loss_weight_denoise must be nonnegative")


@dataclass
class ForwardOutput:
    """Everything downstream consumers need from one sentence forward."""

    tag_logits: Tensor  # (l, label_vocab_size)
    denoise_probs: Optional[Tensor]  # (nd,) or None when nd = 0
    selected_mask: np.ndarray  # bool (nd,)
    e_u: Tensor  # (l, hz)
    e_k: np.ndarray  # (l, hz); zeros whenever fusion contributed nothing


@dataclass
class _EncoderLayer:
    attn: AttentionParams
    ln1_g: Tensor
    ln1_b: Tensor
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    ln2_g: Tensor
    ln2_b: Tensor


class LexTagModel:
    """Trainable tagger with a lexicon-knowledge extractor bolted on."""

    def __init__(
        self,
        config: ModelConfig,
        seed: int = 0,
        init_scale: float = 0.02,
        extractor_init_scale: float = 0.1,
    ):
        self.config = config
        self._params: dict[str, Tensor] = {}
        self._rng = np.random.default_rng(seed)
        rng = np.random.default_rng(seed + 1)
        hz = config.hz

        def param(name: str, values) -> Tensor:
            t = Tensor(values, requires_grad=True)
            self._params[name] = t
            return t

        def normal(*shape, scale=init_scale):
            return rng.normal(0.0, scale, size=shape)

        def register_attn(prefix: str, scale: float = init_scale) -> AttentionParams:
            attn = AttentionParams.create(hz, config.head_count, rng, scale)
            for name, t in attn.named(prefix):
                self._params[name] = t
            return attn

        self.subword_emb = param("encoder.subword_emb", normal(config.subword_vocab_size, hz))
        self.pos_emb = param("encoder.pos_emb", normal(config.max_seq_length, hz))
        self.emb_ln_g = param("encoder.emb_ln_g", np.ones(hz))
        self.emb_ln_b = param("encoder.emb_ln_b", np.zeros(hz))

        self.layers: list[_EncoderLayer] = []
        for i in range(config.encoder_layers):
            p = f"encoder.layer{i}"
            self.layers.append(
                _EncoderLayer(
                    attn=register_attn(f"{p}.attn"),
                    ln1_g=param(f"{p}.ln1_g", np.ones(hz)),
                    ln1_b=param(f"{p}.ln1_b", np.zeros(hz)),
                    w1=param(f"{p}.ffn_w1", normal(hz, 4 * hz)),
                    b1=param(f"{p}.ffn_b1", np.zeros(4 * hz)),
                    w2=param(f"{p}.ffn_w2", normal(4 * hz, hz)),
                    b2=param(f"{p}.ffn_b2", np.zeros(hz)),
                    ln2_g=param(f"{p}.ln2_g", np.ones(hz)),
                    ln2_b=param(f"{p}.ln2_b", np.zeros(hz)),
                )
            )

        # The extractor attentions run without layer norm, so activations pick
        # up a factor of the weight scale at every projection; at 0.02 the
        # candidate scores are near-constant and the denoiser barely trains.
        xs = extractor_init_scale
        self.tag_emb = param("extractor.tag_emb", normal(config.tag_vocab_size, hz, scale=xs))
        self.dn_seq_attn = register_attn("extractor.seq_attn", scale=xs)
        self.dn_cls_attn = register_attn("extractor.cls_attn", scale=xs)
        self.dn_w = param("extractor.dn_w", normal(hz, 1, scale=xs))
        self.dn_b = param("extractor.dn_b", np.zeros(1))

        self.tagger_w = param("tagger.w", normal(hz, config.label_vocab_size))
        self.tagger_b = param("tagger.b", np.zeros(config.label_vocab_size))

    # -- parameter plumbing --------------------------------------------------

    def named_parameters(self) -> dict[str, Tensor]:
        return dict(self._params)

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    # -- components ------------------------------------------------------------

    def encode(self, tokens: Sequence[int], training: bool = False,
               rng: Optional[np.random.Generator] = None) -> Tensor:
        """Run the transformer encoder; returns E_u of shape (l, hz)."""
        l = len(tokens)
        if l > self.config.max_seq_length:
            raise ValueError(f"input length {l} exceeds max_seq_length {self.config.max_seq_length}")
        if l < 1:
            raise ValueError("tokens must be non-empty")
        rng = rng or self._rng
        rate = self.config.dropout_rate

        x = T.add(
            T.embedding_lookup(self.subword_emb, np.asarray(tokens, dtype=np.intp)),
            T.index_select(self.pos_emb, 0, np.arange(l)),
        )
        x = T.layer_norm(x, self.emb_ln_g, self.emb_ln_b)
        x = T.dropout(x, rate, rng, training)
        for layer in self.layers:
            a = T.self_attention(x, layer.attn)
            a = T.dropout(a, rate, rng, training)
            x = T.layer_norm(T.add(x, a), layer.ln1_g, layer.ln1_b)
            h = T.affine(T.relu(T.affine(x, layer.w1, layer.b1)), layer.w2, layer.b2)
            h = T.dropout(h, rate, rng, training)
            x = T.layer_norm(T.add(x, h), layer.ln2_g, layer.ln2_b)
        return x

    def embed_and_combine(self, match_set: MatchSet, e_u: Tensor) -> Tensor:
        """E_d per candidate: tag embedding plus the shared token encoding.

        Returns one stacked tensor of shape (nd, l, hz).
        """
        ids = np.asarray([c.tags for c in match_set.candidates], dtype=np.intp)
        if ids.shape[1] != e_u.shape[0]:
            raise ValueError(f"candidate length {ids.shape[1]} vs sentence length {e_u.shape[0]}")
        return T.add(T.embedding_lookup(self.tag_emb, ids), e_u)

    def denoise(self, e_d: Tensor) -> tuple[Tensor, Tensor]:
        """R_d per candidate and the per-candidate keep probabilities z.

        Candidate sequences attend internally, their summary rows attend to
        each other, and a sigmoid affine scores each candidate.
        """
        nd = e_d.shape[0]
        r_d = T.self_attention(e_d, self.dn_seq_attn)
        r_cls = T.reshape(T.index_select(r_d, 1, [0]), (nd, self.config.hz))
        y = T.self_attention(r_cls, self.dn_cls_attn)
        z = T.reshape(T.sigmoid(T.affine(y, self.dn_w, self.dn_b)), (nd,))
        return r_d, z

    def select_candidates(
        self,
        r_d: Tensor,
        z: Tensor,
        force_selection: Optional[Sequence[bool]] = None,
    ) -> tuple[Optional[Tensor], Optional[Tensor], np.ndarray]:
        """Pick candidate representations for fusion.

        Hard mode keeps rows with z above the threshold (the decision itself
        carries no gradient); soft mode keeps everything and hands z over as
        value weights.  Returns (rows, weights, boolean mask).
        """
        if self.config.fusion_mode == "soft":
            mask = np.ones(r_d.shape[0], dtype=bool)
            return r_d, z, mask
        if force_selection is not None:
            mask = np.asarray(force_selection, dtype=bool)
        else:
            mask = z.values > self.config.hard_threshold
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            return None, None, mask
        return T.index_select(r_d, 0, idx), None, mask

    def fuse(self, e_u: Tensor, selected: Optional[Tensor],
             weights: Optional[Tensor] = None) -> Optional[Tensor]:
        """Column-wise attention of token encodings over selected candidates."""
        if selected is None or selected.shape[0] == 0:
            return None
        return T.columnwise_attention(e_u, selected, weights)

    def tag(self, e_o: Tensor, training: bool = False,
            rng: Optional[np.random.Generator] = None) -> Tensor:
        rng = rng or self._rng
        x = T.dropout(e_o, self.config.dropout_rate, rng, training)
        return T.affine(x, self.tagger_w, self.tagger_b)

    # -- full passes ------------------------------------------------------------

    def forward(
        self,
        tokens: Sequence[int],
        match_set: MatchSet,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
        force_selection: Optional[Sequence[bool]] = None,
    ) -> ForwardOutput:
        rng = rng or self._rng
        e_u = self.encode(tokens, training, rng)
        l, hz = e_u.shape
        nd = len(match_set)
        if nd == 0:
            return ForwardOutput(
                tag_logits=self.tag(e_u, training, rng),
                denoise_probs=None,
                selected_mask=np.zeros(0, dtype=bool),
                e_u=e_u,
                e_k=np.zeros((l, hz), dtype=e_u.values.dtype),
            )

        e_d = self.embed_and_combine(match_set, e_u)
        r_d, z = self.denoise(e_d)
        selected, weights, mask = self.select_candidates(r_d, z, force_selection)
        e_k = self.fuse(e_u, selected, weights)
        if e_k is None:
            logits = self.tag(e_u, training, rng)
            e_k_out = np.zeros((l, hz), dtype=e_u.values.dtype)
        else:
            logits = self.tag(T.add(e_u, e_k), training, rng)
            e_k_out = e_k.values
        return ForwardOutput(
            tag_logits=logits,
            denoise_probs=z,
            selected_mask=mask,
            e_u=e_u,
            e_k=e_k_out,
        )

    def forward_baseline(self, tokens: Sequence[int], training: bool = False,
                         rng: Optional[np.random.Generator] = None) -> Tensor:
        """Plain encoder+tagger logits with the extractor absent."""
        rng = rng or self._rng
        return self.tag(self.encode(tokens, training, rng), training, rng)

    def predict(self, tokens: Sequence[int], match_set: MatchSet) -> np.ndarray:
        """Greedy per-token tag ids (inference mode, no graph)."""
        with T.no_grad():
            out = self.forward(tokens, match_set, training=False)
        return np.argmax(out.tag_logits.values, axis=-1)


# -- checkpoints -------------------------------------------------------------------

_CHECKPOINT_KIND = "lextag-model"


def save_checkpoint(model: LexTagModel, path, extras: Optional[dict] = None) -> None:
    header = {
        "kind": _CHECKPOINT_KIND,
        "config": asdict(model.config),
        "extras": extras or {},
    }
    T.save_container(path, header, {k: t.values for k, t in model.named_parameters().items()})


def load_checkpoint(path) -> tuple[LexTagModel, dict]:
    header, tensors = T.load_container(path)
    if header.get("kind") != _CHECKPOINT_KIND:
        raise ValueError(f"{path}: not a model checkpoint")
    config = ModelConfig(**header["config"])
    model = LexTagModel(config, seed=0)
    params = model.named_parameters()
    missing = sorted(set(params) - set(tensors))
    surplus = sorted(set(tensors) - set(params))
    if missing or surplus:
        raise ValueError(f"{path}: parameter names do not match (missing {missing}, surplus {surplus})")
    for name, t in params.items():
        if tensors[name].shape != t.values.shape:
            raise ValueError(
                f"{path}: shape mismatch for {name}: {tensors[name].shape} vs {t.values.shape}"
            )
    for name, t in params.items():
        t.values = tensors[name].astype(T.get_default_dtype())
    return model, header.get("extras", {})
