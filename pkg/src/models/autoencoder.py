"""
Convolutional recurrent sequence-to-sequence autoencoder for byte strings.

Encoder: byte embeddings -> strided 1D convolution over non-overlapping
n-grams -> gated recurrent cell; the final hidden state is the latent vector.
Decoder: a second recurrent cell started from the latent vector; each step
consumes the previous n-gram of output bytes and a transposed convolution
expands its state into n byte distributions.
"""

import math
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field
from tqdm import tqdm

from ..config import AutoencoderConfig, get_settings
from ..errors import CodecInputError, DatasetError, ShapeError
from ..tensor import Adam, Module, Tensor, backward, clip_grad_norm, no_grad, ops
from ..tensor.tensor import DTYPE
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import Embedding, GRUCell, Linear, StridedConv1d, TransposedConv1d

MODEL_KIND = "autoencoder"
INFERENCE_CHUNK = 256


class CharVocabulary:
    """All 256 byte values. Byte 0x00 doubles as pad, start and terminator symbol."""

    size = 256
    pad_id = 0
    start_id = 0
    terminator_id = 0

    @staticmethod
    def to_ids(s: str) -> np.ndarray:
        try:
            raw = s.encode("latin-1")
        except UnicodeEncodeError:
            raise CodecInputError(f"String is not a byte string: {s!r}") from None
        return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)

    @classmethod
    def to_string(cls, ids: Iterable[int]) -> str:
        """Bytes up to (not including) the first terminator"""
        out = bytearray()
        for i in ids:
            if int(i) == cls.terminator_id:
                break
            out.append(int(i))
        return out.decode("latin-1")


def padded_length(length: int, kernel_width: int) -> int:
    return -(-length // kernel_width) * kernel_width


class StringAutoencoder(Module):
    def __init__(self, config: AutoencoderConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        l, d, c, kw = config.embedding_size, config.hidden_size, config.conv_channels, config.kernel_width
        self.embedding = Embedding(CharVocabulary.size, l, rng)
        self.encoder_conv = StridedConv1d(l, c, kw, rng)
        self.encoder_cell = GRUCell(c, d, rng)
        self.decoder_input = Linear(kw * l, c, rng)
        self.decoder_cell = GRUCell(c, d, rng)
        self.decoder_output = TransposedConv1d(d, CharVocabulary.size, kw, rng)

    @property
    def latent_size(self) -> int:
        return self.config.hidden_size

    @property
    def kernel_width(self) -> int:
        return self.config.kernel_width

    @property
    def max_length(self) -> int:
        return self.config.max_length

    def encoder_steps(self, length: int) -> int:
        return padded_length(length, self.kernel_width) // self.kernel_width

    def check_string(self, s: str) -> np.ndarray:
        if not s:
            raise CodecInputError("Cannot encode an empty string")
        if len(s) > self.max_length:
            raise CodecInputError(f"String of length {len(s)} exceeds max length {self.max_length}")
        ids = CharVocabulary.to_ids(s)
        if np.any(ids == CharVocabulary.terminator_id):
            raise CodecInputError(f"String contains a NUL byte: {s!r}")
        return ids

    def decode_caps(self, strings: Sequence[str], factor: int = 2) -> List[int]:
        """Free-running decode cap per string: factor x its padded length, within max length"""
        return [min(factor * padded_length(len(s), self.kernel_width), self.max_length) for s in strings]

    # --- encoder ---
    def encode_tensor(self, ids: np.ndarray) -> Tensor:
        """(batch, padded_length) byte ids -> (batch, d) latent tensor"""
        features = ops.tanh(self.encoder_conv(self.embedding(ids)))
        h = Tensor(np.zeros((ids.shape[0], self.latent_size), dtype=DTYPE))
        for t in range(features.shape[1]):
            h = self.encoder_cell(features[:, t, :], h)
        return h

    def encode(self, s: str) -> np.ndarray:
        return self.encode_many([s])[0]

    def encode_many(self, strings: Sequence[str]) -> np.ndarray:
        """Latents for many strings, batched by padded length"""
        ids = [self.check_string(s) for s in strings]
        out = np.zeros((len(ids), self.latent_size), dtype=DTYPE)
        buckets: Dict[int, List[int]] = defaultdict(list)
        for i, row in enumerate(ids):
            buckets[padded_length(len(row), self.kernel_width)].append(i)
        with no_grad():
            for length in sorted(buckets):
                members = buckets[length]
                for start in range(0, len(members), INFERENCE_CHUNK):
                    chunk = members[start:start + INFERENCE_CHUNK]
                    batch = np.zeros((len(chunk), length), dtype=np.int64)
                    for r, i in enumerate(chunk):
                        batch[r, :len(ids[i])] = ids[i]
                    out[chunk] = self.encode_tensor(batch).data
        return out

    # --- decoder ---
    def _decoder_step(self, previous: np.ndarray, h: Tensor) -> Tuple[Tensor, Tensor]:
        batch = previous.shape[0]
        flat = ops.reshape(self.embedding(previous), (batch, self.kernel_width * self.config.embedding_size))
        h = self.decoder_cell(ops.tanh(self.decoder_input(flat)), h)
        return self.decoder_output(h), h

    def decoder_logits(self, z: Tensor, steps: int, targets: Optional[np.ndarray] = None,
                       sample_mask: Optional[np.ndarray] = None) -> Tensor:
        """Unrolled decoder logits of shape (batch, steps * kernel_width, 256).

        With `targets` the previous n-gram is the true one (teacher forcing),
        except where `sample_mask[row, step]` asks for the model's own argmax.
        """
        kw = self.kernel_width
        previous = np.full((z.shape[0], kw), CharVocabulary.start_id, dtype=np.int64)
        h = z
        outputs = []
        for t in range(steps):
            logits, h = self._decoder_step(previous, h)
            outputs.append(logits)
            guessed = np.argmax(logits.data, axis=-1)
            if targets is None:
                previous = guessed
            else:
                truth = targets[:, t * kw:(t + 1) * kw]
                previous = truth if sample_mask is None else np.where(sample_mask[:, t:t + 1], guessed, truth)
        return ops.concat(outputs, axis=1)

    def decode(self, z: np.ndarray, max_chars: Optional[int] = None) -> str:
        return self.decode_many(np.asarray(z)[None, :], [max_chars or self.max_length])[0]

    def decode_many(self, latents: np.ndarray, caps: Optional[Sequence[int]] = None) -> List[str]:
        """Greedy decode; each row stops at its first terminator or its cap"""
        latents = np.asarray(latents, dtype=DTYPE)
        if latents.ndim != 2 or latents.shape[1] != self.latent_size:
            raise ShapeError("decode", latents.shape, (self.latent_size,), detail="latent size")
        if not np.all(np.isfinite(latents)):
            raise CodecInputError("Latent vector has non-finite entries")
        count = latents.shape[0]
        caps = np.full(count, self.max_length) if caps is None else np.asarray(caps, dtype=np.int64)
        decoded: List[str] = []
        for start in range(0, count, INFERENCE_CHUNK):
            stop = min(start + INFERENCE_CHUNK, count)
            decoded.extend(self._greedy(latents[start:stop], caps[start:stop]))
        return decoded

    def _greedy(self, latents: np.ndarray, caps: np.ndarray) -> List[str]:
        kw = self.kernel_width
        steps = math.ceil(int(caps.max()) / kw) if len(caps) else 0
        out = np.zeros((latents.shape[0], steps * kw), dtype=np.int64)
        previous = np.full((latents.shape[0], kw), CharVocabulary.start_id, dtype=np.int64)
        done = np.zeros(latents.shape[0], dtype=bool)
        with no_grad():
            h = Tensor(latents)
            for t in range(steps):
                logits, h = self._decoder_step(previous, h)
                # np.argmax returns the first maximum: ties go to the lowest byte id
                previous = np.argmax(logits.data, axis=-1)
                out[:, t * kw:(t + 1) * kw] = previous
                done |= np.any(previous == CharVocabulary.terminator_id, axis=1) | ((t + 1) * kw >= caps)
                if done.all():
                    break
        return [CharVocabulary.to_string(out[i, :caps[i]]) for i in range(latents.shape[0])]

    def reconstruct(self, strings: Sequence[str], factor: int = 2) -> List[str]:
        return self.decode_many(self.encode_many(strings), self.decode_caps(strings, factor))

    # --- training objective ---
    def batch_loss(self, strings: Sequence[str], rng: Optional[np.random.Generator] = None,
                   sampling_probability: float = 0.0) -> Tensor:
        """Mean per-character cross-entropy up to and including the terminator.

        All strings in the batch must share the same padded length.
        """
        ids = [self.check_string(s) for s in strings]
        kw = self.kernel_width
        keys = {(padded_length(len(r), kw), padded_length(len(r) + 1, kw)) for r in ids}
        if len(keys) != 1:
            raise CodecInputError(f"Batch mixes padded lengths {sorted(keys)}")
        enc_length, dec_length = keys.pop()
        inputs = np.zeros((len(ids), enc_length), dtype=np.int64)
        targets = np.zeros((len(ids), dec_length), dtype=np.int64)
        mask = np.zeros((len(ids), dec_length), dtype=DTYPE)
        for r, row in enumerate(ids):
            inputs[r, :len(row)] = row
            targets[r, :len(row)] = row
            mask[r, :len(row) + 1] = 1.0
        steps = dec_length // kw
        sample_mask = None
        if rng is not None and sampling_probability > 0:
            sample_mask = rng.random((len(ids), steps)) < sampling_probability
        logits = self.decoder_logits(self.encode_tensor(inputs), steps, targets=targets, sample_mask=sample_mask)
        return ops.cross_entropy(logits, targets, mask=mask)

    # --- persistence ---
    def save(self, path):
        return save_checkpoint(path, MODEL_KIND, self.config.model_dump(), self.state_dict())

    @classmethod
    def load(cls, path) -> "StringAutoencoder":
        meta, state = load_checkpoint(path, expected_kind=MODEL_KIND)
        model = cls(AutoencoderConfig.model_validate(meta["hyperparameters"]))
        model.load_state_dict(state)
        return model


def character_accuracy(original: str, decoded: str) -> float:
    """Aligned matches over the longer length; overhang counts as wrong"""
    longest = max(len(original), len(decoded))
    if longest == 0:
        return 1.0
    return sum(a == b for a, b in zip(original, decoded)) / longest


def reconstruction_accuracy(model: StringAutoencoder, corpus: Sequence[str]) -> float:
    corpus = list(corpus)
    if not corpus:
        raise DatasetError("Reconstruction accuracy needs a non-empty corpus")
    decoded = model.reconstruct(corpus)
    return float(np.mean([character_accuracy(o, d) for o, d in zip(corpus, decoded)]))


class AutoencoderEpoch(BaseModel):
    epoch: int
    loss: float
    validation_accuracy: float
    scheduled_sampling: bool


class AutoencoderReport(BaseModel):
    train_size: int
    validation_size: int
    epochs: List[AutoencoderEpoch] = Field(default_factory=list)
    first_epoch_losses: List[float] = Field(default_factory=list)

    @property
    def final_accuracy(self) -> float:
        return self.epochs[-1].validation_accuracy if self.epochs else 0.0


VALIDATION_SAMPLE = 512


def train_autoencoder(strings: Sequence[str], config: AutoencoderConfig) -> Tuple[StringAutoencoder, AutoencoderReport]:
    """Fit the codec on raw strings; returns the model and a per-epoch report"""
    strings = list(strings)
    if not strings:
        raise CodecInputError("Autoencoder training needs a non-empty corpus")
    model = StringAutoencoder(config)
    for s in strings:
        model.check_string(s)

    rng = np.random.default_rng(config.seed + 1)
    order = rng.permutation(len(strings))
    n_val = int(len(strings) * config.validation_fraction)
    train_idx = order[n_val:] if n_val < len(strings) else order
    val_idx = order[:n_val] if n_val else train_idx
    validation = [strings[i] for i in val_idx[:VALIDATION_SAMPLE]]

    # Batches share both the encoder length and the decoder step count.
    buckets: Dict[Tuple[int, int], List[int]] = defaultdict(list)
    for i in train_idx:
        n = len(strings[i])
        buckets[(padded_length(n, config.kernel_width), padded_length(n + 1, config.kernel_width))].append(int(i))

    params = model.parameters()
    optimizer = Adam(params, lr=config.learning_rate, beta1=config.beta1, beta2=config.beta2)
    report = AutoencoderReport(train_size=len(train_idx), validation_size=n_val)
    forced_epochs = config.epochs if config.teacher_forcing == "always" else math.ceil(config.epochs / 2)
    logger.info(f"Training autoencoder d={config.hidden_size} kw={config.kernel_width} "
                f"({model.num_parameters()} parameters) on "
                f"{len(train_idx)} strings ({len(buckets)} length buckets)")

    for epoch in range(config.epochs):
        sampled = epoch >= forced_epochs
        batches = []
        for key in sorted(buckets):
            members = rng.permutation(buckets[key])
            batches.extend(members[i:i + config.batch_size] for i in range(0, len(members), config.batch_size))
        losses = []
        bar = tqdm(rng.permutation(len(batches)), desc=f"autoencoder epoch {epoch + 1}/{config.epochs}",
                   disable=not get_settings().progress, leave=False)
        for b in bar:
            model.zero_grad()
            loss = model.batch_loss([strings[i] for i in batches[b]], rng=rng,
                                    sampling_probability=config.sampling_probability if sampled else 0.0)
            backward(loss)
            clip_grad_norm(params, config.grad_clip)
            optimizer.step()
            losses.append(loss.item())
            bar.set_postfix(loss=f"{losses[-1]:.4f}")
        if epoch == 0:
            report.first_epoch_losses = losses
        accuracy = reconstruction_accuracy(model, validation)
        report.epochs.append(AutoencoderEpoch(epoch=epoch + 1, loss=float(np.mean(losses)),
                                              validation_accuracy=accuracy, scheduled_sampling=sampled))
        logger.info(f"Autoencoder epoch {epoch + 1}: loss={np.mean(losses):.4f} "
                    f"reconstruction={accuracy:.4f}{' (scheduled sampling)' if sampled else ''}")
    return model, report
