"""Small causal transformer that answers severity, then outcome.

The model reads a prompt token sequence ending in ``<ANSWER>``. The hidden
state at ``<ANSWER>`` scores the two severity tokens; the severity token is
then appended and the hidden state at that position scores the two outcome
tokens, so the outcome is conditioned on the severity already emitted.
Decoding is greedy; the constrained decoder masks ``death`` after ``mild``.

``tuning_mode="prefix"`` adds learnable key/value prefix vectors to every
attention layer. After a warm-up over a fraction of the steps, only those
prefixes and the output projection keep training.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Literal, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .promptify import LabelPair, TokenSeq, Vocabulary

CHECKPOINT_FORMAT = "seroprompt.seqmodel"
CHECKPOINT_VERSION = 1

# output head columns
MILD, SEVERE, SURVIVE, DEATH = 0, 1, 2, 3


class SequenceOverflowError(ValueError):
    pass


@dataclass(frozen=True)
class SeqModelConfig:
    embed_dim: int = 64
    n_layers: int = 2
    n_heads: int = 2
    ffn_dim: int = 128
    max_seq_len: int = 160
    dropout: float = 0.0
    learning_rate: float = 3e-4
    batch_size: int = 32
    epochs: int = 8
    rng_seed: int = 0
    tuning_mode: Literal["full", "prefix"] = "full"
    prefix_len: int = 8
    warmup_fraction: float = 0.2
    weight_decay: float = 0.0
    validation_fraction: float = 0.0
    patience: int = 5
    ordinal_bins: bool = True

    def __post_init__(self):
        if self.embed_dim % self.n_heads:
            raise ValueError("embed_dim must be divisible by n_heads")
        if self.tuning_mode not in ("full", "prefix"):
            raise ValueError(f"unknown tuning_mode {self.tuning_mode!r}")
        if self.tuning_mode == "prefix" and self.prefix_len < 1:
            raise ValueError("prefix_len must be >= 1 in prefix mode")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if not 0 <= self.warmup_fraction <= 1:
            raise ValueError("warmup_fraction must be in [0, 1]")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in [0, 1)")

    @property
    def n_prefix(self) -> int:
        return self.prefix_len if self.tuning_mode == "prefix" else 0


class CausalSelfAttention(nn.Module):
    def __init__(self, dim: int, n_heads: int, n_prefix: int, dropout: float):
        super().__init__()
        self.n_heads = n_heads
        self.head_dim = dim // n_heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.dropout = nn.Dropout(dropout)
        if n_prefix:
            self.prefix_k = nn.Parameter(0.02 * torch.randn(n_heads, n_prefix, self.head_dim))
            self.prefix_v = nn.Parameter(0.02 * torch.randn(n_heads, n_prefix, self.head_dim))
        else:
            self.prefix_k = self.prefix_v = None

    def forward(self, x: torch.Tensor, return_weights: bool = False):
        B, T, C = x.shape
        q, k, v = self.qkv(x).split(C, dim=2)
        q, k, v = (t.view(B, T, self.n_heads, self.head_dim).transpose(1, 2) for t in (q, k, v))
        allowed = torch.ones(T, T, dtype=torch.bool, device=x.device).tril()
        if self.prefix_k is not None:
            P = self.prefix_k.shape[1]
            k = torch.cat([self.prefix_k.unsqueeze(0).expand(B, -1, -1, -1), k], dim=2)
            v = torch.cat([self.prefix_v.unsqueeze(0).expand(B, -1, -1, -1), v], dim=2)
            allowed = torch.cat([torch.ones(T, P, dtype=torch.bool, device=x.device), allowed], dim=1)
        scores = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(~allowed, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        out = (self.dropout(weights) @ v).transpose(1, 2).reshape(B, T, C)
        out = self.proj(out)
        return (out, weights) if return_weights else out


class Block(nn.Module):
    def __init__(self, cfg: SeqModelConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(cfg.embed_dim)
        self.attn = CausalSelfAttention(cfg.embed_dim, cfg.n_heads, cfg.n_prefix, cfg.dropout)
        self.ln2 = nn.LayerNorm(cfg.embed_dim)
        self.mlp = nn.Sequential(
            nn.Linear(cfg.embed_dim, cfg.ffn_dim),
            nn.GELU(),
            nn.Linear(cfg.ffn_dim, cfg.embed_dim),
            nn.Dropout(cfg.dropout),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x))
        return x + self.mlp(self.ln2(x))


def cumulative_bin_matrix(vocab: Vocabulary) -> torch.Tensor:
    """(V, V) 0/1 matrix mapping raw rows to effective token embeddings.

    Row ``i`` of a bin token ``<bin:f:b>`` sums the raw rows of
    ``<bin:f:0>`` .. ``<bin:f:b>``; every other token maps to itself.
    """
    V = len(vocab)
    M = torch.eye(V)
    first: dict[str, int] = {}
    for i, tok in enumerate(vocab.tokens):
        if tok.startswith("<bin:"):
            feature = tok[len("<bin:"):].rsplit(":", 1)[0]
            start = first.setdefault(feature, i)
            M[i, start:i + 1] = 1.0
    return M


class SeqNet(nn.Module):
    def __init__(self, vocab_size: int, cfg: SeqModelConfig, bin_matrix: torch.Tensor | None = None):
        super().__init__()
        self.register_buffer("bin_matrix", bin_matrix if bin_matrix is not None else torch.eye(vocab_size))
        self.tok_emb = nn.Embedding(vocab_size, cfg.embed_dim)
        self.pos_emb = nn.Embedding(cfg.max_seq_len, cfg.embed_dim)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.ln_f = nn.LayerNorm(cfg.embed_dim)
        self.head = nn.Linear(cfg.embed_dim, 4)
        nn.init.normal_(self.tok_emb.weight, std=0.02)
        nn.init.normal_(self.pos_emb.weight, std=0.02)
        nn.init.normal_(self.head.weight, std=0.02)
        nn.init.zeros_(self.head.bias)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        """Answer-head logits ``(B, T, 4)`` at every position."""
        T = ids.shape[1]
        pos = torch.arange(T, device=ids.device)
        table = self.bin_matrix.to(self.tok_emb.weight.dtype) @ self.tok_emb.weight
        x = F.embedding(ids, table) + self.pos_emb(pos)
        for block in self.blocks:
            x = block(x)
        return self.head(self.ln_f(x))

    def prefix_parameters(self) -> list[nn.Parameter]:
        out = []
        for block in self.blocks:
            if block.attn.prefix_k is not None:
                out += [block.attn.prefix_k, block.attn.prefix_v]
        return out

    def freeze_backbone(self) -> None:
        """Leave only prefix vectors and the output projection trainable."""
        keep = {id(p) for p in self.prefix_parameters()} | {id(p) for p in self.head.parameters()}
        for p in self.parameters():
            p.requires_grad_(id(p) in keep)


def count_trainable(net: nn.Module) -> int:
    return sum(p.numel() for p in net.parameters() if p.requires_grad)


@dataclass
class SeqModel:
    net: SeqNet
    config: SeqModelConfig
    vocab: Vocabulary
    loss_curve: list[float] = field(default_factory=list)

    @property
    def vocab_hash(self) -> str:
        return self.vocab.fingerprint()


def _build_net(vocab: Vocabulary, config: SeqModelConfig) -> SeqNet:
    bins = cumulative_bin_matrix(vocab) if config.ordinal_bins else None
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.rng_seed)
        net = SeqNet(len(vocab), config, bins)
    return net


def init_seqmodel(vocab: Vocabulary, config: SeqModelConfig) -> SeqModel:
    return SeqModel(net=_build_net(vocab, config), config=config, vocab=vocab)


def _stack(examples: Sequence[tuple[TokenSeq, LabelPair]], config: SeqModelConfig) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    if not examples:
        raise ValueError("empty training set")
    prompts = [seq.prompt_ids for seq, _ in examples]
    length = len(prompts[0])
    if any(len(p) != length for p in prompts):
        raise ValueError("all prompts must have the same length")
    if length + 1 > config.max_seq_len:
        raise SequenceOverflowError(f"sequence of {length + 1} tokens exceeds max_seq_len={config.max_seq_len}")
    ids = torch.tensor(prompts, dtype=torch.long)
    sev = torch.tensor([pair.severity_bit for _, pair in examples], dtype=torch.long)
    out = torch.tensor([pair.outcome_bit for _, pair in examples], dtype=torch.long)
    return ids, sev, out


def teacher_forced_loss(net: SeqNet, ids: torch.Tensor, sev: torch.Tensor, out: torch.Tensor,
                        sev_token_ids: tuple[int, int]) -> torch.Tensor:
    """Mean cross-entropy per answer position (severity, then outcome given true severity)."""
    sev_tokens = torch.where(sev == 1, sev_token_ids[1], sev_token_ids[0])
    logits = net(torch.cat([ids, sev_tokens[:, None]], dim=1))
    sev_loss = F.cross_entropy(logits[:, -2, MILD:SEVERE + 1], sev)
    out_loss = F.cross_entropy(logits[:, -1, SURVIVE:DEATH + 1], out)
    return 0.5 * (sev_loss + out_loss)


def _sev_ids(vocab: Vocabulary) -> tuple[int, int]:
    return vocab.sev_mild, vocab.sev_severe


def evaluate_loss(model: SeqModel, examples: Sequence[tuple[TokenSeq, LabelPair]]) -> float:
    ids, sev, out = _stack(examples, model.config)
    model.net.eval()
    with torch.no_grad():
        return float(teacher_forced_loss(model.net, ids, sev, out, _sev_ids(model.vocab)))


def _validation_mask(n: int, groups: Sequence[str] | None, fraction: float, seed: int) -> np.ndarray:
    """Hold out ``fraction`` of the groups (patients), or of the samples without groups."""
    mask = np.zeros(n, dtype=bool)
    if fraction <= 0:
        return mask
    rng = np.random.default_rng([seed, 7])
    if groups is None:
        mask[rng.permutation(n)[: max(1, int(round(fraction * n)))]] = True
        return mask
    unique = list(dict.fromkeys(groups))
    held = {unique[i] for i in rng.permutation(len(unique))[: max(1, int(round(fraction * len(unique))))]}
    return np.array([g in held for g in groups])


def train_seqmodel(
    examples: Sequence[tuple[TokenSeq, LabelPair]],
    vocab: Vocabulary,
    config: SeqModelConfig = SeqModelConfig(),
    max_steps: int | None = None,
    groups: Sequence[str] | None = None,
) -> SeqModel:
    """Teacher-forced Adam training on the two answer positions.

    Mini-batches follow a seeded permutation per epoch. ``loss_curve`` holds
    the training loss before training and after every epoch. With
    ``validation_fraction > 0`` a seeded share of ``groups`` (patient ids;
    samples when None) is held out, training stops after ``patience``
    epochs without a better validation loss, and the best epoch's weights
    are kept. ``max_steps`` optionally caps the number of optimizer steps.
    """
    ids_all, sev_all, out_all = _stack(examples, config)
    if groups is not None and len(groups) != len(ids_all):
        raise ValueError("groups must align with examples")
    held = torch.from_numpy(_validation_mask(len(ids_all), groups, config.validation_fraction, config.rng_seed))
    if bool(held.all()):
        raise ValueError("validation split left no training examples")
    ids, sev, out = ids_all[~held], sev_all[~held], out_all[~held]
    model = init_seqmodel(vocab, config)
    net = model.net
    sev_tokens = _sev_ids(vocab)
    n = len(ids)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    if max_steps is not None:
        total_steps = min(total_steps, max_steps)
    warmup_steps = math.ceil(config.warmup_fraction * total_steps) if config.tuning_mode == "prefix" else None
    order_rng = np.random.default_rng(config.rng_seed)

    def loss_on(mask_ids, mask_sev, mask_out) -> float:
        net.eval()
        with torch.no_grad():
            return float(teacher_forced_loss(net, mask_ids, mask_sev, mask_out, sev_tokens))

    def val_loss() -> float:
        return loss_on(ids_all[held], sev_all[held], out_all[held])

    curve = [loss_on(ids, sev, out)]
    use_val = bool(held.any())
    best_val = val_loss() if use_val else None
    best_state = {k: v.clone() for k, v in net.state_dict().items()} if use_val else None
    best_curve_len = 1
    since_best = 0
    optimizer = torch.optim.Adam(net.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay)
    step = 0
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.rng_seed + 1)
        for _ in range(config.epochs):
            if step >= total_steps:
                break
            perm = torch.from_numpy(order_rng.permutation(n))
            net.train()
            for start in range(0, n, config.batch_size):
                if step >= total_steps:
                    break
                if warmup_steps is not None and step == warmup_steps:
                    net.freeze_backbone()
                batch = perm[start:start + config.batch_size]
                optimizer.zero_grad(set_to_none=True)
                loss = teacher_forced_loss(net, ids[batch], sev[batch], out[batch], sev_tokens)
                loss.backward()
                optimizer.step()
                step += 1
            curve.append(loss_on(ids, sev, out))
            if use_val:
                current = val_loss()
                if current < best_val:
                    best_val, since_best = current, 0
                    best_state = {k: v.clone() for k, v in net.state_dict().items()}
                    best_curve_len = len(curve)
                else:
                    since_best += 1
                    if since_best >= config.patience:
                        break
    if use_val:
        net.load_state_dict(best_state)
        curve = curve[:best_curve_len]
    if warmup_steps is not None and step <= warmup_steps:
        net.freeze_backbone()
    net.eval()
    model.loss_curve = curve
    return model


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecodeResult:
    label: LabelPair
    severity_probs: tuple[float, float]  # (mild, severe)
    outcome_probs: tuple[float, float]  # (survive, death), after masking when constrained


def decode_batch(model: SeqModel, prompt_ids: np.ndarray | torch.Tensor, constrained: bool = True) -> list[DecodeResult]:
    """Greedy two-step decoding of many prompts (each ending at ``<ANSWER>``).

    Ties go to the lower-index token (mild, survive). With ``constrained``
    the death logit is set to -inf whenever mild was chosen.
    """
    ids = torch.as_tensor(np.asarray(prompt_ids), dtype=torch.long)
    if ids.ndim != 2 or ids.shape[0] == 0:
        return []
    if not bool((ids[:, -1] == model.vocab.answer).all()):
        raise ValueError("prompts must end with the <ANSWER> token")
    if ids.shape[1] + 1 > model.config.max_seq_len:
        raise SequenceOverflowError(f"sequence of {ids.shape[1] + 1} tokens exceeds max_seq_len")
    if ids.min() < 0 or ids.max() >= len(model.vocab):
        raise ValueError("token id outside the vocabulary")
    net = model.net
    net.eval()
    with torch.no_grad():
        sev_logits = net(ids)[:, -1, MILD:SEVERE + 1]
        severe = sev_logits[:, 1] > sev_logits[:, 0]
        chosen = torch.where(severe, model.vocab.sev_severe, model.vocab.sev_mild)
        out_logits = net(torch.cat([ids, chosen[:, None]], dim=1))[:, -1, SURVIVE:DEATH + 1].clone()
        if constrained:
            out_logits[~severe, 1] = float("-inf")
        death = out_logits[:, 1] > out_logits[:, 0]
        sev_p = torch.softmax(sev_logits.double(), dim=-1)
        out_p = torch.softmax(out_logits.double(), dim=-1)
    results = []
    for i in range(len(ids)):
        s = "severe" if bool(severe[i]) else "mild"
        o = "death" if bool(death[i]) else "survive"
        label = LabelPair(s, o) if constrained else LabelPair.unchecked(s, o)
        results.append(
            DecodeResult(
                label=label,
                severity_probs=(float(sev_p[i, 0]), float(sev_p[i, 1])),
                outcome_probs=(float(out_p[i, 0]), float(out_p[i, 1])),
            )
        )
    return results


def decode_constrained(model: SeqModel, tokens: TokenSeq) -> DecodeResult:
    return decode_batch(model, np.asarray([tokens.prompt_ids]), constrained=True)[0]


def decode_unconstrained(model: SeqModel, tokens: TokenSeq) -> LabelPair:
    """Ablation decoder without the mask; may return (mild, death)."""
    return decode_batch(model, np.asarray([tokens.prompt_ids]), constrained=False)[0].label


# ---------------------------------------------------------------------------
# Gradient check
# ---------------------------------------------------------------------------


def gradient_check(
    config: SeqModelConfig,
    examples: Sequence[tuple[TokenSeq, LabelPair]],
    vocab: Vocabulary,
    step: float = 1e-5,
    freeze_backbone: bool | None = None,
) -> float:
    """Max relative error between autograd and central differences.

    Runs in float64 over every element of every trainable parameter (in
    prefix mode the backbone is frozen first unless told otherwise). The
    relative error of one element is ``|a - n| / max(|a|, |n|, 1e-7)``.
    """
    ids, sev, out = _stack(examples, config)
    net = _build_net(vocab, config).double()
    net.eval()
    if freeze_backbone is None:
        freeze_backbone = config.tuning_mode == "prefix"
    if freeze_backbone:
        net.freeze_backbone()
    sev_tokens = _sev_ids(vocab)
    params = [p for p in net.parameters() if p.requires_grad]
    net.zero_grad(set_to_none=True)
    teacher_forced_loss(net, ids, sev, out, sev_tokens).backward()
    worst = 0.0
    with torch.no_grad():
        for p in params:
            analytic = p.grad.detach().clone().reshape(-1)
            flat = p.data.view(-1)
            for i in range(flat.numel()):
                orig = float(flat[i])
                flat[i] = orig + step
                plus = float(teacher_forced_loss(net, ids, sev, out, sev_tokens))
                flat[i] = orig - step
                minus = float(teacher_forced_loss(net, ids, sev, out, sev_tokens))
                flat[i] = orig
                numeric = (plus - minus) / (2 * step)
                a = float(analytic[i])
                err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-7)
                worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(model: SeqModel, path: str | Path, meta: dict[str, Any] | None = None) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "vocab": model.vocab.to_dict(),
        "vocab_hash": model.vocab_hash,
        "loss_curve": list(model.loss_curve),
        "trainable": [name for name, p in model.net.named_parameters() if p.requires_grad],
        "state_dict": model.net.state_dict(),
        "meta": meta or {},
    }
    torch.save(payload, Path(path))


def load_checkpoint(path: str | Path) -> SeqModel:
    payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a sequence-model checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    config = SeqModelConfig(**payload["config"])
    vocab = Vocabulary.from_dict(payload["vocab"])
    if vocab.fingerprint() != payload["vocab_hash"]:
        raise ValueError(f"{path}: vocabulary hash mismatch")
    net = SeqNet(len(vocab), config)
    net.load_state_dict(payload["state_dict"])
    trainable = set(payload["trainable"])
    for name, p in net.named_parameters():
        p.requires_grad_(name in trainable)
    net.eval()
    return SeqModel(net=net, config=config, vocab=vocab, loss_curve=list(payload["loss_curve"]))
