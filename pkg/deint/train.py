"""
Training: minimizes the squared reconstruction error of both missing half
patches plus a total-variation penalty on the two woven full patches, with
ADAM over shuffled minibatches.

Reduction order: each batch loss is a float64 sum over pixels of that batch
divided by its size; epoch losses are the size-weighted mean of batch losses.
"""

import logging
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import ArchitectureConfig, TrainConfig
from .dataset import PatchTriplet, stack_batch
from .frames import Parity
from .model import DeinterlaceNet, build_net, forward, load_weights, parameters, save_weights
from .tensor import (ContractViolation, NonFiniteError, Tensor, backward, mul, square, sub, tensor_sum,
                     total_variation, weave_rows)

logger = logging.getLogger(__name__)

LOSS_LOG_COLUMNS = ["epoch", "train_loss", "val_loss", "seconds"]


class TrainingError(Exception):
    """Raised when training cannot start or continue"""
    pass


class NonFiniteLossError(TrainingError):
    """Raised when a batch produces a NaN or Inf loss"""

    def __init__(self, epoch: int, batch: int, detail: str = ""):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"Non-finite loss at epoch {epoch}, batch {batch}" + (f": {detail}" if detail else ""))


@dataclass
class LossReport:
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    seconds: List[float] = field(default_factory=list)

    @property
    def epochs(self) -> int:
        return len(self.train_loss)

    def record(self, train_loss: float, val_loss: float, seconds: float) -> None:
        self.train_loss.append(train_loss)
        self.val_loss.append(val_loss)
        self.seconds.append(seconds)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "epoch": range(1, self.epochs + 1),
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "seconds": self.seconds,
        }, columns=LOSS_LOG_COLUMNS)

    def to_bytes(self) -> bytes:
        values = np.array([self.train_loss, self.val_loss, self.seconds], dtype="<f8")
        return struct.pack("<I", self.epochs) + values.tobytes()

    @classmethod
    def from_bytes(cls, payload: bytes) -> "LossReport":
        (n,) = struct.unpack_from("<I", payload)
        if len(payload) != 4 + 24 * n:
            raise TrainingError(f"Corrupt loss record: {len(payload)} bytes for {n} epochs")
        values = np.frombuffer(payload, dtype="<f8", offset=4).reshape(3, n)
        return cls(*(row.tolist() for row in values))


@dataclass
class AdamState:
    """Step count and per-parameter first/second moment estimates."""
    step: int
    m: List[np.ndarray]
    v: List[np.ndarray]

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])

    def to_bytes(self) -> bytes:
        moments = [a.astype("<f4").tobytes() for pair in zip(self.m, self.v) for a in pair]
        return struct.pack("<II", self.step, len(self.m)) + b"".join(moments)

    @classmethod
    def from_bytes(cls, payload: bytes, params: Sequence[np.ndarray]) -> "AdamState":
        step, count = struct.unpack_from("<II", payload)
        if count != len(params):
            raise TrainingError(f"Optimizer state holds {count} parameters, the net has {len(params)}")
        expected = 8 + 8 * sum(p.size for p in params)
        if len(payload) != expected:
            raise TrainingError(f"Corrupt optimizer state: {len(payload)} bytes, expected {expected}")
        m, v, offset = [], [], 8
        for p in params:
            for target in (m, v):
                target.append(np.frombuffer(payload, dtype="<f4", count=p.size, offset=offset)
                              .reshape(p.shape).astype(np.float32))
                offset += 4 * p.size
        return cls(step, m, v)


def loss(predicted_even_t: Tensor, predicted_odd_t1: Tensor, inputs: np.ndarray,
         target_even_t: np.ndarray, target_odd_t1: np.ndarray, lambda_tv: float) -> Tensor:
    """
    Batch loss: squared error of both half patches plus lambda_tv times the
    total variation of the woven full patches, divided by the batch size.

    The known rows of each woven patch come from the interlaced input and are
    constants, so the TV gradient reaches the network only through the
    predicted rows.

    Args:
        predicted_even_t, predicted_odd_t1: (N, 1, P/2, P) network outputs
        inputs: (N, 1, P, P) interlaced patches
        target_even_t, target_odd_t1: (N, 1, P/2, P) ground-truth half patches
        lambda_tv: Weight of the TV term

    Raises:
        ContractViolation: If any shape disagrees
    """
    shapes = {predicted_even_t.shape, predicted_odd_t1.shape, target_even_t.shape, target_odd_t1.shape}
    if len(shapes) != 1 or len(predicted_even_t.shape) != 4:
        raise ContractViolation(
            f"Loss shapes disagree: predictions {predicted_even_t.shape}/{predicted_odd_t1.shape}, "
            f"targets {target_even_t.shape}/{target_odd_t1.shape}")
    n, _, half, width = predicted_even_t.shape
    if inputs.shape != (n, 1, 2 * half, width):
        raise ContractViolation(f"Interlaced inputs {inputs.shape} do not match predictions {predicted_even_t.shape}")

    data = tensor_sum(square(sub(predicted_even_t, target_even_t))) + \
        tensor_sum(square(sub(predicted_odd_t1, target_odd_t1)))
    total = data
    if lambda_tv:
        woven_t = weave_rows(inputs[:, :, Parity.ODD.offset::2], predicted_even_t, Parity.EVEN.offset)
        woven_t1 = weave_rows(inputs[:, :, Parity.EVEN.offset::2], predicted_odd_t1, Parity.ODD.offset)
        total = data + mul(total_variation(woven_t) + total_variation(woven_t1), lambda_tv)
    return mul(total, 1.0 / n)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """
    One bias-corrected ADAM update. ``params`` are updated in place; moments
    are kept in each parameter's dtype.
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ContractViolation("adam_step needs one gradient and one moment pair per parameter")

    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ContractViolation(f"Parameter {p.shape}, gradient {g.shape} and moment {m.shape} shapes differ")
        g = g.astype(p.dtype, copy=False)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= (lr * (m / correction1) / (np.sqrt(v / correction2) + eps)).astype(p.dtype, copy=False)
    return state


def _flat_params(net: DeinterlaceNet) -> List[Tensor]:
    return [t for _, weight, bias in parameters(net) for t in (weight, bias)]


def _batch_loss(net: DeinterlaceNet, inputs: np.ndarray, even_t: np.ndarray, odd_t1: np.ndarray,
                lambda_tv: float) -> Tensor:
    predicted_even_t, predicted_odd_t1 = forward(net, Tensor(inputs))
    return loss(predicted_even_t, predicted_odd_t1, inputs, even_t, odd_t1, lambda_tv)


def evaluate_loss(net: DeinterlaceNet, triplets: Sequence[PatchTriplet], lambda_tv: float,
                  batch_size: int = 64) -> float:
    """Size-weighted mean loss over ``triplets`` without recording gradients."""
    if not triplets:
        raise TrainingError("Cannot evaluate the loss of an empty set")
    trainable = [t.requires_grad for t in _flat_params(net)]
    net.set_trainable(False)
    try:
        inputs, even_t, odd_t1 = stack_batch(triplets)
        total = 0.0
        for start in range(0, len(triplets), batch_size):
            window = slice(start, start + batch_size)
            batch = _batch_loss(net, inputs[window], even_t[window], odd_t1[window], lambda_tv)
            total += batch.item() * len(inputs[window])
        return total / len(triplets)
    finally:
        if any(trainable):
            net.set_trainable(True)


def save_checkpoint(path: Union[str, Path], net: DeinterlaceNet, state: AdamState, report: LossReport) -> Path:
    return save_weights(net, path, extensions={"ADAM": state.to_bytes(), "LOSS": report.to_bytes()})


def load_checkpoint(path: Union[str, Path], arch: Optional[ArchitectureConfig] = None
                    ) -> Tuple[DeinterlaceNet, AdamState, LossReport]:
    """
    Raises:
        TrainingError: If the file holds weights but no optimizer state
    """
    net = load_weights(path, arch)
    if "ADAM" not in net.extensions or "LOSS" not in net.extensions:
        raise TrainingError(f"{path} is a weights file without optimizer state, cannot resume from it")
    state = AdamState.from_bytes(net.extensions.pop("ADAM"), [t.data for t in _flat_params(net)])
    report = LossReport.from_bytes(net.extensions.pop("LOSS"))
    if report.epochs != net.epochs_completed:
        raise TrainingError(f"Checkpoint {path} records {report.epochs} loss rows for {net.epochs_completed} epochs")
    return net, state, report


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """Shuffle of epoch ``epoch``; depends only on (seed, epoch) so resumed runs replay it."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def train(train_set: Sequence[PatchTriplet], val_set: Sequence[PatchTriplet],
          config: Optional[TrainConfig] = None, arch: Optional[ArchitectureConfig] = None,
          checkpoint_path: Optional[Union[str, Path]] = None, resume: bool = False,
          on_epoch: Optional[Callable[[int, LossReport], None]] = None) -> Tuple[DeinterlaceNet, LossReport]:
    """
    Train a network with ADAM on minibatches reshuffled every epoch.

    Args:
        train_set: Training triplets
        val_set: Validation triplets, scored with the training lambda_tv after each epoch
        config: Hyperparameters
        arch: Architecture (kernel counts, padding, sharing)
        checkpoint_path: Where to write checkpoints every ``config.checkpoint_every``
            epochs and after the last one
        resume: Continue from ``checkpoint_path`` when it exists
        on_epoch: Called with (epoch number, report so far) after every epoch

    Returns:
        The trained network and its per-epoch loss report

    Raises:
        TrainingError: If either set is empty
        NonFiniteLossError: If a batch loss or gradient becomes non-finite
    """
    config = config or TrainConfig()
    arch = arch or ArchitectureConfig()
    if not train_set or not val_set:
        raise TrainingError(f"Training needs nonempty sets (train={len(train_set)}, validation={len(val_set)})")

    if resume and checkpoint_path and Path(checkpoint_path).exists():
        net, state, report = load_checkpoint(checkpoint_path, arch)
        logger.info(f"Resuming from {checkpoint_path} after epoch {net.epochs_completed}")
    else:
        net = build_net(arch, seed=config.seed)
        state = AdamState.zeros_like([t.data for t in _flat_params(net)])
        report = LossReport()

    inputs, even_t, odd_t1 = stack_batch(train_set)
    n = len(train_set)
    params = _flat_params(net)
    net.set_trainable(True)

    for epoch in range(net.epochs_completed, config.epochs):
        started = time.perf_counter()
        order = epoch_order(config.seed, epoch, n)
        weighted = 0.0
        for batch_id, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            try:
                batch = _batch_loss(net, inputs[idx], even_t[idx], odd_t1[idx], config.lambda_tv)
                backward(batch)
            except NonFiniteError as e:
                raise NonFiniteLossError(epoch + 1, batch_id, str(e)) from e
            value = batch.item()
            if not np.isfinite(value):
                raise NonFiniteLossError(epoch + 1, batch_id)
            adam_step([p.data for p in params], [p.grad for p in params], state,
                      config.learning_rate, config.beta1, config.beta2, config.eps)
            weighted += value * len(idx)

        train_loss = weighted / n
        val_loss = evaluate_loss(net, val_set, config.lambda_tv, config.batch_size)
        report.record(train_loss, val_loss, time.perf_counter() - started)
        net.epochs_completed = epoch + 1
        net.final_loss = train_loss
        logger.info(f"Epoch {epoch + 1}/{config.epochs}: train {train_loss:.6g}, "
                    f"validation {val_loss:.6g} ({report.seconds[-1]:.1f}s)")

        if checkpoint_path and ((epoch + 1) % config.checkpoint_every == 0 or epoch + 1 == config.epochs):
            save_checkpoint(checkpoint_path, net, state, report)
        if on_epoch:
            on_epoch(epoch + 1, report)

    net.set_trainable(False)
    return net, report


def write_loss_log(report: LossReport, path: Union[str, Path]) -> Path:
    """CSV with header epoch,train_loss,val_loss,seconds."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report.to_frame().to_csv(path, index=False)
    return path
