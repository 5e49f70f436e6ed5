"""Tests for the MIC branch and caption decoding."""

import itertools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from dml_captioning.src.autograd import Tensor, no_grad
from dml_captioning.src.data.vocab import EOS, build_vocab
from dml_captioning.src.errors import ConfigError, DataError
from dml_captioning.src.model.decoding import Hypothesis, beam_search, greedy_search
from dml_captioning.src.model.dml import DMLModel
from dml_captioning.src.model.mic import (
    BASELINE_MODE,
    DecodeSpec,
    GenerationRequest,
    ar_logits,
    ar_loss,
    beam_decode,
    decode,
    encode_image,
    generate_all_modes,
    greedy_decode,
)

TOY_EOS, TOY_A, TOY_B, TOY_BOS = 0, 1, 2, 3


def _toy_step(prefix):
    """Hand-built three-step distribution over {EOS, a, b}."""
    tokens = list(prefix[1:])
    if len(tokens) == 0:
        probs = [0.002, 0.6, 0.398]
    elif len(tokens) == 1:
        probs = [0.002, 0.499, 0.499] if tokens[0] == TOY_A else [0.002, 0.9, 0.098]
    else:
        probs = [0.98, 0.01, 0.01]
    return np.log(np.array(probs))


def _sequence_logprob(tokens):
    total, prefix = 0.0, [TOY_BOS]
    for token in tokens:
        total += float(_toy_step(prefix)[token])
        prefix.append(token)
    return total


def _features(model: DMLModel, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).normal(size=(4, model.cfg.d_img))


def _scale_weights(model: DMLModel, std: float = 0.5, seed: int = 2) -> None:
    rng = np.random.default_rng(seed)
    for name, tensor in model.store.items():
        if not name.endswith("gain"):
            tensor.data[...] = rng.normal(0.0, std, size=tensor.shape)


class TestSearch:
    """Test greedy and beam search on a hand-built distribution."""

    def test_beam_beats_greedy_on_toy(self):
        """Width 3 finds b a EOS, which greedy misses."""
        beam = beam_search(_toy_step, TOY_BOS, TOY_EOS, width=3, max_len=3)
        greedy = greedy_search(_toy_step, TOY_BOS, TOY_EOS, max_len=3)
        assert beam.tokens == (TOY_B, TOY_A, TOY_EOS)
        assert beam.logprob == pytest.approx(np.log(0.398 * 0.9 * 0.98), abs=1e-12)
        assert greedy.tokens == (TOY_A, TOY_A, TOY_EOS)
        assert beam.logprob > greedy.logprob

    def test_beam_matches_exhaustive_enumeration(self):
        """The width-3 result is the best of all sequences up to length 3."""
        candidates = []
        for length in (1, 2, 3):
            for seq in itertools.product(range(3), repeat=length):
                if TOY_EOS in seq[:-1]:
                    continue
                if length < 3 and seq[-1] != TOY_EOS:
                    continue
                candidates.append((_sequence_logprob(seq), seq))
        best = max(candidates)
        beam = beam_search(_toy_step, TOY_BOS, TOY_EOS, width=3, max_len=3)
        assert beam.tokens == best[1]
        assert beam.logprob == pytest.approx(best[0], abs=1e-12)

    def test_width_one_is_greedy(self):
        """Beam width 1 follows the greedy path exactly."""
        beam = beam_search(_toy_step, TOY_BOS, TOY_EOS, width=1, max_len=3)
        greedy = greedy_search(_toy_step, TOY_BOS, TOY_EOS, max_len=3)
        assert beam == greedy

    def test_truncation(self):
        """Hitting max_len without EOS leaves the hypothesis unfinished."""
        hyp = greedy_search(_toy_step, TOY_BOS, TOY_EOS, max_len=2)
        assert hyp.tokens == (TOY_A, TOY_A)
        assert not hyp.finished

    def test_invalid_width(self):
        """Widths below one are rejected."""
        with pytest.raises(ConfigError):
            beam_search(_toy_step, TOY_BOS, TOY_EOS, width=0, max_len=3)

    def test_length_penalty_score(self):
        """A positive length penalty divides by length^alpha."""
        hyp = Hypothesis((1, 2, 0), -3.0, True)
        assert hyp.score(0.0) == -3.0
        assert hyp.score(1.0) == pytest.approx(-1.0)

    def test_decode_spec_parsing(self):
        """`greedy` and `beam:N` parse; anything else is rejected."""
        assert DecodeSpec.parse("greedy").kind == "greedy"
        spec = DecodeSpec.parse("beam:5", length_penalty=0.7)
        assert (spec.kind, spec.width, spec.length_penalty) == ("beam", 5, 0.7)
        assert spec.describe() == "beam:5"
        for text in ("beam", "beam:x", "sample"):
            with pytest.raises(ConfigError):
                DecodeSpec.parse(text)
        with pytest.raises(ConfigError):
            DecodeSpec("beam", 0)


class TestImageEncoder:
    """Test the region-feature encoder."""

    def test_region_permutation_permutes_memory(self, toy_model):
        """Regions carry no positions, so permuting them permutes the memory rows."""
        _scale_weights(toy_model)
        features = _features(toy_model)
        perm = np.array([3, 1, 0, 2])
        memory = encode_image(features, toy_model).numpy()
        permuted = encode_image(features[perm], toy_model).numpy()
        np.testing.assert_allclose(permuted, memory[perm], atol=1e-12)

    def test_dimension_mismatch(self, toy_model):
        """Wrong feature width or rank is a data error."""
        with pytest.raises(DataError):
            encode_image(np.zeros((2, toy_model.cfg.d_img + 1)), toy_model)
        with pytest.raises(DataError):
            encode_image(np.zeros(toy_model.cfg.d_img), toy_model)

    def test_mic_loss_reaches_image_encoder(self, toy_model):
        """The captioning loss trains the image encoder."""
        _scale_weights(toy_model)
        memory = encode_image(_features(toy_model), toy_model)
        ar_loss([6, 7, 8], toy_model.codebook.lookup(0), memory, toy_model).backward()
        grad = toy_model.store["mic.image_encoder.proj.weight"].grad
        assert grad is not None and np.any(grad)


class TestTeacherForcing:
    """Test the autoregressive caption loss."""

    def test_codebook_detached_by_default(self, toy_model):
        """MIC gradients do not reach the codebook unless enabled."""
        _scale_weights(toy_model)
        memory = encode_image(_features(toy_model), toy_model)
        ar_loss([6, 7], toy_model.codebook.lookup(1), memory, toy_model).backward()
        assert toy_model.codebook.entries.grad is None

    def test_codebook_updates_when_enabled(self, toy_config):
        """With the flag on, the codebook row receives MIC gradient."""
        model = DMLModel(toy_config.with_updates(mic_updates_codebook=True), seed=0)
        _scale_weights(model)
        memory = encode_image(_features(model), model)
        ar_loss([6, 7], model.codebook.lookup(1), memory, model).backward()
        grad = model.codebook.entries.grad
        assert grad is not None and np.any(grad[1]) and not np.any(grad[0])

    def test_zero_mode_equals_unconditioned(self, toy_model):
        """A zero mode vector gives the unconditioned captioner's loss."""
        _scale_weights(toy_model)
        with no_grad():
            memory = encode_image(_features(toy_model), toy_model)
            zero = Tensor(np.zeros(toy_model.cfg.d_model))
            with_zero = ar_loss([6, 7, 8], zero, memory, toy_model).item()
            without = ar_loss([6, 7, 8], None, memory, toy_model).item()
        assert with_zero == pytest.approx(without, abs=1e-12)

    def test_causality(self, toy_model):
        """Changing target token t changes logits only at positions after t."""
        _scale_weights(toy_model)
        with no_grad():
            memory = encode_image(_features(toy_model), toy_model)
            q = toy_model.codebook.lookup(0)
            a = ar_logits([6, 7, 8, 9], q, memory, toy_model).numpy()
            b = ar_logits([6, 7, 11, 9], q, memory, toy_model).numpy()
        np.testing.assert_allclose(a[:3], b[:3], atol=1e-12)
        assert not np.allclose(a[3], b[3])

    def test_matches_independent_nll(self, toy_model):
        """Unsmoothed loss equals the mean shifted-target NLL computed in numpy."""
        _scale_weights(toy_model)
        caption = [6, 7, 8]
        with no_grad():
            memory = encode_image(_features(toy_model), toy_model)
            q = toy_model.codebook.lookup(3)
            logits = ar_logits(caption, q, memory, toy_model).numpy()
            loss = ar_loss(caption, q, memory, toy_model, smoothing=0.0).item()
        shifted = logits - logits.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        targets = caption + [EOS]
        expected = -np.mean([logp[i, t] for i, t in enumerate(targets)])
        assert loss == pytest.approx(expected, abs=1e-12)

    def test_empty_caption_rejected(self, toy_model):
        """Zero-length captions cannot be scored."""
        memory = encode_image(_features(toy_model), toy_model)
        with pytest.raises(DataError):
            ar_loss([], None, memory, toy_model)


class TestGeneration:
    """Test mode-conditioned generation."""

    def test_greedy_is_deterministic(self, toy_model):
        """The same request twice gives the same caption."""
        _scale_weights(toy_model)
        request = GenerationRequest(_features(toy_model), mode=1, max_len=8)
        assert greedy_decode(request, toy_model.codebook, toy_model) == greedy_decode(
            request, toy_model.codebook, toy_model
        )

    def test_greedy_logprob_is_self_consistent(self, toy_model):
        """Re-scoring a greedy output reproduces its log-probability and argmaxes."""
        _scale_weights(toy_model)
        features = _features(toy_model)
        caption = greedy_decode(GenerationRequest(features, mode=2, max_len=8), toy_model.codebook, toy_model)
        produced = caption.tokens + ([] if caption.truncated else [EOS])
        with no_grad():
            memory = encode_image(features, toy_model)
            q = Tensor(toy_model.codebook.entries.data[2])
            logits = ar_logits(produced[:-1], q, memory, toy_model).numpy()
        shifted = logits - logits.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        assert sum(logp[i, t] for i, t in enumerate(produced)) == pytest.approx(caption.logprob, abs=1e-9)
        assert [int(np.argmax(row)) for row in logp] == produced

    def test_beam_width_one_matches_greedy(self, toy_model):
        """Width-1 beam decoding is bit-identical to greedy."""
        _scale_weights(toy_model)
        features = _features(toy_model)
        greedy = greedy_decode(GenerationRequest(features, mode=0, max_len=8), toy_model.codebook, toy_model)
        beam = beam_decode(
            GenerationRequest(features, mode=0, decode=DecodeSpec("beam", 1), max_len=8),
            toy_model.codebook,
            toy_model,
        )
        assert beam == greedy

    def test_mode_offset_locality(self, toy_model):
        """Mode b with mode a's vector injected reproduces mode a's output exactly."""
        _scale_weights(toy_model)
        features = _features(toy_model)
        codebook = toy_model.codebook
        mode_a = greedy_decode(GenerationRequest(features, mode=0, max_len=8), codebook, toy_model)
        injected = greedy_decode(
            GenerationRequest(features, mode=3, max_len=8, mode_vector=codebook.entries.data[0].copy()),
            codebook,
            toy_model,
        )
        assert injected.tokens == mode_a.tokens
        assert injected.logprob == mode_a.logprob

    def test_invalid_mode(self, toy_model):
        """Modes outside the codebook are rejected."""
        with pytest.raises(ConfigError):
            greedy_decode(GenerationRequest(_features(toy_model), mode=99), toy_model.codebook, toy_model)

    def test_length_bound(self, toy_model):
        """Captions end with EOS or carry the truncation flag within max_len."""
        _scale_weights(toy_model)
        caption = greedy_decode(GenerationRequest(_features(toy_model), mode=0, max_len=3), toy_model.codebook, toy_model)
        assert len(caption.tokens) <= 3
        assert caption.truncated or len(caption.tokens) < 3

    def test_generate_all_modes(self, toy_model):
        """One caption per effective mode, ordered by mode index."""
        toy_model.codebook.usage_counts[[3, 1]] = [2, 5]
        captions = generate_all_modes(_features(toy_model), toy_model.codebook, toy_model, max_len=4)
        assert [c.mode for c in captions] == [1, 3]
        listed = generate_all_modes(_features(toy_model), toy_model.codebook, toy_model, modes=[2, 0], max_len=4)
        assert [c.mode for c in listed] == [0, 2]

    def test_baseline_model_single_caption(self, toy_config):
        """A model trained without modes yields one caption tagged -1."""
        model = DMLModel(toy_config.with_updates(use_modes=False), seed=0)
        captions = generate_all_modes(_features(model), model.codebook, model, max_len=4)
        assert len(captions) == 1
        assert captions[0].mode == BASELINE_MODE

    def test_record_format(self, toy_model):
        """Generation records carry image id, mode, caption text and log-probability."""
        vocab = build_vocab(["a dog on a mat", "two cats"])
        caption = greedy_decode(GenerationRequest(_features(toy_model), mode=0, max_len=4), toy_model.codebook, toy_model)
        record = caption.to_record("img-1", vocab)
        assert set(record) == {"image_id", "mode", "caption", "logprob"}
        assert record["mode"] == 0
        assert isinstance(record["caption"], str)


if __name__ == "__main__":
    pytest.main([__file__])
