"""Joint CdVAE + MIC training loop.

Every random draw in a step comes from a generator seeded by (seed, step,
purpose), so a run resumed from a checkpoint continues bit-identically.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..autograd import Tensor
from ..autograd import functional as F
from ..autograd.serialization import write_json
from ..data.dataset import TrainingScene
from ..data.vocab import Vocabulary
from ..errors import AssignmentError, ConfigError, NumericError
from ..model.assignment import ModeAssignment
from ..model.cdvae import CdvaeSettings, MaskingStrategy, cdvae_step
from ..model.codebook import DEFAULT_BETA, usage_report
from ..model.config import ModelConfig
from ..model.dml import CODEBOOK_PARAM, DMLModel
from ..model.mic import ar_loss, encode_image
from ..utils import JsonlWriter, read_jsonl, write_jsonl
from .checkpoint import load_checkpoint, restore_model, restore_optimizer, save_checkpoint
from .optimizer import AdamW, OptimizerConfig, clip_gradients, global_norm, optimizer_update

logger = logging.getLogger(__name__)

BATCH_STREAM, MIC_STREAM, DROPOUT_STREAM = 0, 1, 2
TRAIN_LOG = "train_log.jsonl"
USAGE_LOG = "usage_log.jsonl"
FINAL_DIR = "final"


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int = 1500
    images_per_batch: int = 8
    sampled_caps_per_image: int = 1
    learning_rate: float = 2e-3
    weight_decay: float = 0.01
    warmup_steps: int = 100
    grad_clip_norm: float = 1.0
    label_smoothing: float = 0.1
    beta: float = DEFAULT_BETA
    masking: str = "full"
    seed: int = 0
    preset: str = "desk"
    usage_every: int = 100
    checkpoint_every: int = 0
    log_every: int = 50

    def __post_init__(self) -> None:
        if self.total_steps < 1:
            raise ConfigError("total_steps must be positive")
        if self.images_per_batch < 1:
            raise ConfigError("images_per_batch must be positive")
        if self.sampled_caps_per_image < 1:
            raise ConfigError("sampled_caps_per_image must be at least 1")
        if self.grad_clip_norm <= 0:
            raise ConfigError("grad_clip_norm must be positive")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError("label_smoothing must be in [0, 1)")
        MaskingStrategy.parse(self.masking)

    @property
    def masking_strategy(self) -> MaskingStrategy:
        return MaskingStrategy.parse(self.masking)

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            warmup_steps=self.warmup_steps,
            total_steps=self.total_steps,
        )

    def cdvae_settings(self) -> CdvaeSettings:
        return CdvaeSettings(beta=self.beta, label_smoothing=self.label_smoothing, masking=self.masking_strategy)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class StepMetrics:
    step: int
    cdvae_loss: float
    mic_loss: float
    vq_loss: float
    commit_loss: float
    lr: float
    effective_modes: int
    grad_norm: float = 0.0
    injective: bool = True

    @property
    def cdvae_total(self) -> float:
        return self.cdvae_loss + self.vq_loss + self.commit_loss

    @property
    def total(self) -> float:
        return self.cdvae_total + self.mic_loss

    def to_log(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "cdvae_loss": self.cdvae_loss,
            "mic_loss": self.mic_loss,
            "vq_loss": self.vq_loss,
            "commit_loss": self.commit_loss,
            "lr": self.lr,
            "effective_modes": self.effective_modes,
        }


@dataclass
class TrainState:
    model: DMLModel
    optimizer: AdamW
    cfg: TrainConfig
    step: int = 0
    out_dir: Optional[Path] = None

    @classmethod
    def create(cls, model: DMLModel, cfg: TrainConfig, out_dir: Optional[Path] = None) -> "TrainState":
        optimizer = AdamW(model.store, cfg.optimizer_config(), no_decay=[CODEBOOK_PARAM])
        return cls(model=model, optimizer=optimizer, cfg=cfg, out_dir=out_dir)


@dataclass
class BranchLosses:
    """Batch losses, each a mean per caption over its branch's captions."""

    reconstruction: Tensor
    codebook: Tensor
    commitment: Tensor
    mic: Tensor
    injective: bool = True
    assignments: List[ModeAssignment] = field(default_factory=list)

    @property
    def cdvae_total(self) -> Tensor:
        return F.add(F.add(self.reconstruction, self.codebook), self.commitment)

    @property
    def total(self) -> Tensor:
        return F.add(self.cdvae_total, self.mic)


@dataclass
class TrainingResult:
    checkpoint: Path
    final_metrics: Dict[str, Any]
    steps: int
    log_path: Path
    usage: Dict[str, Any] = field(default_factory=dict)


def step_rng(seed: int, step: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, step, stream])


def select_batch(n_scenes: int, cfg: TrainConfig, step: int) -> List[int]:
    size = min(cfg.images_per_batch, n_scenes)
    return [int(i) for i in step_rng(cfg.seed, step, BATCH_STREAM).choice(n_scenes, size=size, replace=False)]


def compute_losses(
    batch: Sequence[TrainingScene],
    model: DMLModel,
    cfg: TrainConfig,
    step: int,
) -> BranchLosses:
    """Forward pass of both branches over one batch.

    CdVAE consumes every caption of each image; MIC consumes
    `sampled_caps_per_image` captions drawn with the step-seeded generator.
    """
    settings = cfg.cdvae_settings()
    mic_rng = step_rng(cfg.seed, step, MIC_STREAM)
    drop_rng = step_rng(cfg.seed, step, DROPOUT_STREAM) if model.cfg.dropout > 0 else None
    codebook = model.codebook

    recon: List[Tensor] = []
    cb_terms: List[Tensor] = []
    commit_terms: List[Tensor] = []
    mic_terms: List[Tensor] = []
    assignments: List[ModeAssignment] = []
    n_cdvae = 0
    injective = True
    for b, scene in enumerate(batch):
        n = scene.n_captions
        if cfg.sampled_caps_per_image > n:
            raise ConfigError(f"{scene.image_id}: cannot sample {cfg.sampled_caps_per_image} of {n} captions")
        memory = encode_image(scene.features, model, drop_rng)
        assignment = None
        if model.cfg.use_modes:
            losses, assignment = cdvae_step(
                scene.captions,
                memory,
                codebook,
                model,
                settings,
                step=step,
                total_steps=cfg.total_steps,
                seed=[cfg.seed, step, b],
                rng=drop_rng,
            )
            assignments.append(assignment)
            if model.cfg.assignment == "hungarian" and not assignment.is_injective():
                injective = False
            recon.append(losses.reconstruction)
            cb_terms.append(losses.codebook)
            commit_terms.append(losses.commitment)
            n_cdvae += n
        for i in mic_rng.choice(n, size=cfg.sampled_caps_per_image, replace=False):
            i = int(i)
            q = codebook.lookup(assignment.entry_for(i)) if assignment is not None else None
            mic_terms.append(ar_loss(scene.captions[i], q, memory, model, cfg.label_smoothing, drop_rng))

    if not injective:
        raise AssignmentError(f"step {step}: Hungarian assignment was not injective")
    zero = Tensor(0.0)
    return BranchLosses(
        reconstruction=_mean(recon, n_cdvae, zero),
        codebook=_mean(cb_terms, n_cdvae, zero),
        commitment=_mean(commit_terms, n_cdvae, zero),
        mic=_mean(mic_terms, len(mic_terms), zero),
        injective=injective,
        assignments=assignments,
    )


def _mean(terms: List[Tensor], count: int, empty: Tensor) -> Tensor:
    if not terms:
        return empty
    out = terms[0]
    for term in terms[1:]:
        out = F.add(out, term)
    return F.mul(out, 1.0 / count)


def train_step(batch: Sequence[TrainingScene], state: TrainState) -> StepMetrics:
    """One combined backward over CdVAE + MIC losses, clip, AdamW update."""
    model, cfg, step = state.model, state.cfg, state.step
    model.zero_grad()
    losses: Optional[BranchLosses] = None
    try:
        losses = compute_losses(batch, model, cfg, step)
        total = losses.total
        if not math.isfinite(total.item()):
            raise NumericError(f"non-finite loss {total.item()} at step {step}")
    except NumericError as e:
        if not isinstance(e, AssignmentError):
            write_diagnostic(state, str(e), losses)
        raise

    total.backward()
    params = [p for _, p in model.store.items()]
    norm = global_norm(params)
    clip_gradients(params, cfg.grad_clip_norm)
    lr = optimizer_update(state.optimizer, step)
    for assignment in losses.assignments:
        model.codebook.record(assignment)
    state.step += 1
    return StepMetrics(
        step=step,
        cdvae_loss=losses.reconstruction.item(),
        mic_loss=losses.mic.item(),
        vq_loss=losses.codebook.item(),
        commit_loss=losses.commitment.item(),
        lr=lr,
        effective_modes=usage_report(model.codebook).effective_modes,
        grad_norm=norm,
        injective=losses.injective,
    )


def write_diagnostic(state: TrainState, reason: str, losses: Optional[BranchLosses] = None) -> Optional[Path]:
    """Dump loss terms and parameter norms for a failed step."""
    if state.out_dir is None:
        return None
    terms = {}
    if losses is not None:
        terms = {
            "reconstruction": float(losses.reconstruction.data),
            "codebook": float(losses.codebook.data),
            "commitment": float(losses.commitment.data),
            "mic": float(losses.mic.data),
        }
    payload = {
        "step": state.step,
        "reason": reason,
        "losses": {k: (v if math.isfinite(v) else str(v)) for k, v in terms.items()},
        "param_norms": {n: float(np.linalg.norm(p.data)) for n, p in state.model.store.items()},
    }
    path = Path(state.out_dir) / f"diagnostic-step{state.step}.json"
    Path(state.out_dir).mkdir(parents=True, exist_ok=True)
    write_json(path, payload)
    logger.error("training aborted at step %d: %s (diagnostic written to %s)", state.step, reason, path)
    return path


def _checkpoint_config(model_cfg: ModelConfig, cfg: TrainConfig, extra: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    config = dict(extra or {})
    config["model"] = model_cfg.to_dict()
    config["train"] = cfg.to_dict()
    return config


def _trim_log(path: Path, start_step: int) -> None:
    if path.exists():
        write_jsonl(path, [r for r in read_jsonl(path) if int(r["step"]) < start_step])


def run_training(
    scenes: Sequence[TrainingScene],
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    out_dir: Path,
    vocab: Optional[Vocabulary] = None,
    run_config: Optional[Dict[str, Any]] = None,
    resume: Optional[Path] = None,
) -> TrainingResult:
    """Train to `cfg.total_steps`, writing logs, periodic and final checkpoints.

    With `resume`, parameters, optimizer moments, usage counts and the step
    counter are restored and logs past the checkpoint step are discarded.
    """
    if not scenes:
        raise ConfigError("training needs at least one scene")
    if model_cfg.use_modes and model_cfg.assignment == "hungarian":
        widest = max(s.n_captions for s in scenes)
        if widest > model_cfg.k:
            raise AssignmentError(f"images with {widest} captions need k >= {widest}, got k={model_cfg.k}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = _checkpoint_config(model_cfg, cfg, run_config)

    if resume is not None:
        checkpoint = load_checkpoint(resume)
        if checkpoint.model_config != model_cfg:
            raise ConfigError("resume checkpoint was trained with a different model config")
        model = restore_model(checkpoint)
        state = TrainState.create(model, cfg, out_dir)
        restore_optimizer(checkpoint, state.optimizer)
        state.step = checkpoint.step
        logger.info("resuming from %s at step %d", resume, state.step)
    else:
        state = TrainState.create(DMLModel(model_cfg, cfg.seed), cfg, out_dir)

    log_path = out_dir / TRAIN_LOG
    usage_path = out_dir / USAGE_LOG
    _trim_log(log_path, state.step)
    _trim_log(usage_path, state.step + 1)

    last: Dict[str, Any] = {}
    with JsonlWriter(log_path, append=True) as train_log, JsonlWriter(usage_path, append=True) as usage_log:
        while state.step < cfg.total_steps:
            batch = [scenes[i] for i in select_batch(len(scenes), cfg, state.step)]
            metrics = train_step(batch, state)
            last = metrics.to_log()
            train_log.write(last)
            done = state.step
            if cfg.usage_every and done % cfg.usage_every == 0:
                usage_log.write(usage_report(state.model.codebook).to_log(done))
            if cfg.log_every and done % cfg.log_every == 0:
                logger.info(
                    "step %d/%d cdvae=%.4f mic=%.4f modes=%d",
                    done,
                    cfg.total_steps,
                    metrics.cdvae_loss,
                    metrics.mic_loss,
                    metrics.effective_modes,
                )
            if cfg.checkpoint_every and done % cfg.checkpoint_every == 0 and done < cfg.total_steps:
                save_checkpoint(out_dir / f"step-{done}", state.model, state.optimizer, done, config, last, vocab)

    final = save_checkpoint(out_dir / FINAL_DIR, state.model, state.optimizer, state.step, config, last, vocab)
    report = usage_report(state.model.codebook)
    logger.info("training finished: %d steps, %d effective modes", state.step, report.effective_modes)
    return TrainingResult(
        checkpoint=final,
        final_metrics=last,
        steps=state.step,
        log_path=log_path,
        usage={"effective_modes": report.effective_modes, "counts": report.counts},
    )
