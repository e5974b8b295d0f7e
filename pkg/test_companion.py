"""Companion losses on the layer taps and the full training objective."""

import pytest
import torch

from config.experiment import KernelConfig, TrainConfig
from core.companion import (
    CompanionWeights,
    companion_kernel,
    companion_loss,
    main_kernel,
    total_objective,
)
from core.errors import DimensionMismatchError, TooFewRowsError
from core.kernels import KernelKind
from core.objective import ddc_loss
from networks.taps import LayerTap, TapKind


def conv_tap(n=6, layer=1, seed=0):
    g = torch.Generator().manual_seed(seed)
    return LayerTap(layer, TapKind.CONV_MAP, torch.randn(n, 2, 3, 3, generator=g, dtype=torch.float64))


def vector_tap(n=6, layer=2, seed=1):
    g = torch.Generator().manual_seed(seed)
    return LayerTap(layer, TapKind.LAST_HIDDEN_STATE, torch.randn(n, 5, generator=g, dtype=torch.float64))


def batch(n=6, k=3, seed=2):
    g = torch.Generator().manual_seed(seed)
    hidden = torch.randn(n, 4, generator=g, dtype=torch.float64)
    a = torch.softmax(torch.randn(n, k, generator=g, dtype=torch.float64), dim=1)
    return [conv_tap(n), vector_tap(n)], hidden, a


class TestCompanionKernel:
    def test_dispatch_by_tap_kind(self):
        assert companion_kernel(conv_tap(), KernelConfig()).kind is KernelKind.TENSOR
        assert companion_kernel(vector_tap(), KernelConfig()).kind is KernelKind.GAUSSIAN_VECTOR

    @pytest.mark.parametrize("make", [conv_tap, vector_tap])
    def test_duplicate_observation(self, make):
        tap = make()
        tap.batch[3] = tap.batch[0]
        k = companion_kernel(tap, KernelConfig()).entries
        assert k[0, 3].item() == pytest.approx(1.0, abs=1e-10)

    def test_float32_duplicate_far_from_origin(self):
        g = torch.Generator().manual_seed(11)
        rows = 50.0 + 20.0 * torch.randn(5, 100, generator=g)
        rows[3] = rows[1]
        k = companion_kernel(LayerTap(2, TapKind.LAST_HIDDEN_STATE, rows), KernelConfig()).entries
        assert k.dtype == torch.float32
        assert k[1, 3].item() == 1.0 and k[3, 1].item() == 1.0

    def test_single_observation(self):
        with pytest.raises(TooFewRowsError):
            companion_kernel(conv_tap(n=1), KernelConfig())


class TestCompanionLoss:
    def test_uniform_assignments(self):
        a = torch.full((6, 3), 1.0 / 3.0, dtype=torch.float64)
        loss = companion_loss(conv_tap(), a, KernelConfig())
        assert loss.total.item() == pytest.approx(2.0, abs=1e-10)
        assert loss.l2_orthogonality.item() == 0.0

    def test_only_kernel_terms(self):
        taps, _, a = batch()
        cfg = KernelConfig()
        loss = companion_loss(taps[0], a, cfg)
        reference = ddc_loss(a, companion_kernel(taps[0], cfg))
        assert loss.l1_separation.item() == pytest.approx(reference.l1_separation.item(), abs=1e-12)
        assert loss.l3_corner.item() == pytest.approx(reference.l3_corner.item(), abs=1e-12)

    def test_row_mismatch(self):
        a = torch.full((5, 2), 0.5, dtype=torch.float64)
        with pytest.raises(DimensionMismatchError):
            companion_loss(conv_tap(n=6), a, KernelConfig())


class TestTotalObjective:
    def test_zero_lambda_is_plain_ddc(self):
        taps, hidden, a = batch()
        cfg = KernelConfig()
        out = total_objective(taps, hidden, a, CompanionWeights(lam=0.0), cfg)
        assert out.companions == {}
        assert torch.equal(out.total, ddc_loss(a, main_kernel(hidden, cfg)).total)

    def test_disabled_layers_match_zero_lambda(self):
        taps, hidden, a = batch()
        cfg = KernelConfig()
        off = total_objective(taps, hidden, a, CompanionWeights(lam=1.0, per_layer_enabled=[False, False]), cfg)
        zero = total_objective(taps, hidden, a, CompanionWeights(lam=0.0), cfg)
        assert torch.equal(off.total, zero.total)

    def test_composition(self):
        taps, hidden, a = batch()
        cfg = KernelConfig()
        out = total_objective(taps, hidden, a, CompanionWeights(lam=0.5), cfg)
        expected = out.main.total + 0.5 * sum(c.total for c in out.companions.values())
        assert sorted(out.companions) == [1, 2]
        assert out.total.item() == pytest.approx(expected.item(), abs=1e-12)

    def test_partial_enable(self):
        taps, hidden, a = batch()
        out = total_objective(taps, hidden, a, CompanionWeights(lam=1.0, per_layer_enabled=[False, True]), KernelConfig())
        assert sorted(out.companions) == [2]

    def test_monotone_in_lambda(self):
        taps, hidden, a = batch()
        values = [
            total_objective(taps, hidden, a, CompanionWeights(lam=lam), KernelConfig()).total.item()
            for lam in (0.0, 0.1, 0.5, 1.0, 3.0)
        ]
        assert values == sorted(values)

    def test_batch_permutation(self):
        taps, hidden, a = batch(n=7)
        perm = torch.randperm(7)
        permuted = [LayerTap(t.layer_index, t.kind, t.batch[perm]) for t in taps]
        weights, cfg = CompanionWeights(lam=0.7), KernelConfig()
        base = total_objective(taps, hidden, a, weights, cfg).total.item()
        assert total_objective(permuted, hidden[perm], a[perm], weights, cfg).total.item() == pytest.approx(base, abs=1e-10)

    def test_missing_hidden(self):
        taps, _, a = batch()
        with pytest.raises(DimensionMismatchError):
            total_objective(taps, None, a, CompanionWeights(), KernelConfig())

    def test_weights_from_config(self):
        cfg = TrainConfig.model_validate({"lambda": 0.25, "companion_layers": [True, False]})
        weights = CompanionWeights.from_config(cfg)
        assert weights.lam == 0.25
        assert weights.enabled(0) and not weights.enabled(1) and not weights.enabled(5)

    @pytest.mark.parametrize("seed", range(50))
    def test_gradients_match_finite_differences(self, fixed_kernel, seed):
        g = torch.Generator().manual_seed(seed)
        n, k = int(torch.randint(3, 9, (1,), generator=g)), int(torch.randint(2, 5, (1,), generator=g))
        shape = tuple(int(d) for d in torch.randint(2, 5, (3,), generator=g))
        shape = (shape[0], shape[1], min(shape[2], 2))
        maps = torch.randn(n, *shape, generator=g, dtype=torch.float64, requires_grad=True)
        hidden = torch.randn(n, 4, generator=g, dtype=torch.float64, requires_grad=True)
        logits = torch.randn(n, k, generator=g, dtype=torch.float64, requires_grad=True)

        def objective(x, h, z):
            tap = LayerTap(1, TapKind.CONV_MAP, x)
            return total_objective([tap], h, torch.softmax(z, dim=1), CompanionWeights(lam=0.5), fixed_kernel).total

        assert torch.autograd.gradcheck(objective, (maps, hidden, logits), eps=1e-6, atol=1e-6, rtol=1e-3)
