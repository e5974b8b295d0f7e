"""Backbones, taps and the clustering head."""

import pytest
import torch

from config.experiment import ArchitectureSpec, ConvBlockSpec
from core.companion import CompanionWeights, total_objective
from core.errors import EmptySequenceError, ShapeMismatchError
from networks.architecture import conv_tap_shapes, default_cnn_architecture, default_rnn_architecture, layer_summary
from networks.model import build_model, cnn_forward, forward_inputs, model_params, rnn_forward
from networks.taps import SequenceBatch, TapKind


class TestArchitecture:
    def test_mnist_shapes(self):
        spec = default_cnn_architecture((1, 28, 28), 10)
        assert conv_tap_shapes(spec, (1, 28, 28)) == [(32, 14, 14), (64, 7, 7)]

    def test_toy_shapes(self):
        spec = default_cnn_architecture((1, 16, 16), 3)
        assert conv_tap_shapes(spec, (1, 16, 16)) == [(32, 8, 8), (64, 4, 4)]

    def test_head_width(self):
        spec = default_cnn_architecture((1, 16, 16), 10)
        summary = layer_summary(spec, (1, 16, 16), 10)
        assert summary[-1] == {"kind": "clustering_head", "output_shape": [10]}
        assert summary[-2]["output_shape"] == [100]
        assert build_model(spec, (1, 16, 16), 10, seed=0).head.out_features == 10

    def test_rnn_defaults(self):
        spec = default_rnn_architecture()
        assert (spec.rnn_layers, spec.rnn_hidden_size, spec.bidirectional) == (2, 32, True)

    def test_too_small_input(self):
        spec = ArchitectureSpec(kind="cnn", conv_blocks=[ConvBlockSpec(channels=2, pool=4)] * 3)
        with pytest.raises(ShapeMismatchError):
            conv_tap_shapes(spec, (1, 8, 8))


class TestCNNForward:
    def test_assignments_on_simplex(self, tiny_cnn_spec):
        model = build_model(tiny_cnn_spec, (1, 12, 12), 3, seed=1)
        taps, hidden, a = cnn_forward(torch.randn(5, 1, 12, 12), model)
        assert a.shape == (5, 3)
        assert torch.allclose(a.sum(dim=1), torch.ones(5), atol=1e-6)
        assert (a >= 0).all()
        assert hidden.shape == (5, tiny_cnn_spec.hidden_units)
        assert [t.layer_index for t in taps] == [1, 2]
        assert all(t.kind is TapKind.CONV_MAP for t in taps)
        assert tuple(taps[0].batch.shape) == (5, 3, 6, 6)
        assert tuple(taps[1].batch.shape) == (5, 4, 3, 3)

    def test_zero_head_is_uniform(self, tiny_cnn_spec):
        model = build_model(tiny_cnn_spec, (1, 12, 12), 4, seed=1)
        with torch.no_grad():
            model.head.weight.zero_()
            model.head.bias.zero_()
        _, _, a = cnn_forward(torch.randn(3, 1, 12, 12), model)
        assert torch.allclose(a, torch.full((3, 4), 0.25))

    def test_seed_determinism(self, tiny_cnn_spec):
        x = torch.randn(4, 1, 12, 12)
        first = build_model(tiny_cnn_spec, (1, 12, 12), 3, seed=7)
        second = build_model(tiny_cnn_spec, (1, 12, 12), 3, seed=7)
        for p, q in zip(model_params(first).values(), model_params(second).values()):
            assert torch.equal(p, q)
        assert torch.equal(cnn_forward(x, first)[2], cnn_forward(x, second)[2])

    def test_seed_does_not_touch_global_rng(self, tiny_cnn_spec):
        torch.manual_seed(5)
        expected = torch.rand(3)
        torch.manual_seed(5)
        build_model(tiny_cnn_spec, (1, 12, 12), 3, seed=99)
        assert torch.equal(torch.rand(3), expected)

    def test_shape_mismatch(self, tiny_cnn_spec):
        model = build_model(tiny_cnn_spec, (1, 12, 12), 3, seed=1)
        with pytest.raises(ShapeMismatchError):
            cnn_forward(torch.randn(4, 1, 10, 12), model)
        with pytest.raises(ShapeMismatchError):
            rnn_forward(SequenceBatch(torch.randn(2, 3, 1), torch.tensor([3, 2])), model)


class TestRNNForward:
    def test_taps_are_concatenated_last_states(self, tiny_rnn_spec):
        model = build_model(tiny_rnn_spec, (3,), 2, seed=0)
        seqs = SequenceBatch(torch.randn(4, 6, 3), torch.tensor([6, 2, 4, 1]))
        taps, hidden, a = rnn_forward(seqs, model)
        assert len(taps) == 2
        assert all(t.kind is TapKind.LAST_HIDDEN_STATE and t.batch.shape == (4, 8) for t in taps)
        assert hidden.shape == (4, 6)
        assert torch.allclose(a.sum(dim=1), torch.ones(4), atol=1e-6)

    def test_zero_weights_zero_input(self, tiny_rnn_spec):
        model = build_model(tiny_rnn_spec, (3,), 2, seed=0)
        with torch.no_grad():
            for gru in model.backbone.layers:
                for p in gru.parameters():
                    p.zero_()
        seqs = SequenceBatch(torch.zeros(3, 5, 3), torch.tensor([5, 3, 1]))
        taps, _, _ = rnn_forward(seqs, model)
        for tap in taps:
            assert torch.equal(tap.batch, torch.zeros_like(tap.batch))

    def test_padding_is_masked(self, tiny_rnn_spec):
        model = build_model(tiny_rnn_spec, (2,), 2, seed=0)
        model.eval()
        values = torch.randn(2, 5, 2)
        values[1, 3:] = 0.0
        lengths = torch.tensor([5, 3])
        short = SequenceBatch(values, lengths)
        padded = SequenceBatch(torch.cat([values, torch.zeros(2, 4, 2)], dim=1), lengths)
        taps_short, _, _ = rnn_forward(short, model)
        taps_long, _, _ = rnn_forward(padded, model)
        for s, l in zip(taps_short, taps_long):
            assert torch.equal(s.batch, l.batch)

    def test_identical_up_to_padding(self, tiny_rnn_spec):
        model = build_model(tiny_rnn_spec, (2,), 2, seed=0)
        model.eval()
        seq = torch.randn(3, 2)
        values = torch.zeros(2, 6, 2)
        values[0, :3] = seq
        values[1, :3] = seq
        taps, _, _ = rnn_forward(SequenceBatch(values, torch.tensor([3, 3])), model)
        for tap in taps:
            assert torch.equal(tap.batch[0], tap.batch[1])

    def test_empty_sequence(self):
        with pytest.raises(EmptySequenceError):
            SequenceBatch(torch.zeros(2, 4, 1), torch.tensor([4, 0]))

    def test_forward_inputs_dispatch(self, tiny_rnn_spec):
        model = build_model(tiny_rnn_spec, (1,), 3, seed=0)
        out = forward_inputs(model, SequenceBatch(torch.randn(3, 4, 1), torch.tensor([4, 4, 2])))
        assert out.assignments.shape == (3, 3)


class TestSequenceBatch:
    def test_padding_helpers(self):
        values = torch.zeros(2, 4, 1)
        values[0, :2] = 1.0
        batch = SequenceBatch(values, [2, 4])
        assert batch.padding_mask().tolist() == [[False, False, True, True], [False, False, False, False]]
        assert batch.padding_is_zero()
        assert batch.subset(torch.tensor([1])).n == 1

    def test_length_exceeds_padding(self):
        with pytest.raises(ShapeMismatchError):
            SequenceBatch(torch.zeros(1, 3, 1), torch.tensor([4]))


class TestParameterGradients:
    @pytest.mark.parametrize("seed", range(3))
    def test_backprop_matches_finite_differences(self, tiny_cnn_spec, fixed_kernel, seed):
        model = build_model(tiny_cnn_spec, (1, 12, 12), 3, seed=seed, dtype=torch.float64)
        model.train()
        g = torch.Generator().manual_seed(seed)
        images = torch.randn(8, 1, 12, 12, generator=g, dtype=torch.float64)

        def objective():
            out = forward_inputs(model, images)
            return total_objective(out.taps, out.hidden, out.assignments, CompanionWeights(lam=0.5), fixed_kernel).total

        model.zero_grad()
        objective().backward()
        params = [p for p in model.parameters() if p.requires_grad]
        eps = 1e-6
        for _ in range(6):
            p = params[int(torch.randint(len(params), (1,), generator=g))]
            i = int(torch.randint(p.numel(), (1,), generator=g))
            flat = p.data.view(-1)
            original = flat[i].item()
            with torch.no_grad():
                flat[i] = original + eps
                upper = objective().item()
                flat[i] = original - eps
                lower = objective().item()
                flat[i] = original
            numeric = (upper - lower) / (2 * eps)
            analytic = p.grad.view(-1)[i].item()
            assert abs(numeric - analytic) <= 1e-3 * max(abs(numeric), abs(analytic), 1e-4)
