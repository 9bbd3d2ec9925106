import pytest
import torch
import torch.nn as nn

from apgnet.backbone import (
    BackboneConfig,
    PyramidAdapter,
    TinyBackbone,
    build_backbone,
)


def test_config_validation():
    with pytest.raises(ValueError):
        BackboneConfig(variant="resnet")
    with pytest.raises(ValueError):
        BackboneConfig(channels=(16, 16, 64, 128))
    with pytest.raises(ValueError):
        BackboneConfig(channels=(16, 32, 64))


def test_stride_and_channel_contract():
    model = TinyBackbone((16, 32, 64, 128))
    pyramid = model(torch.rand(2, 3, 352, 352))
    assert tuple(pyramid.f1.shape) == (2, 16, 88, 88)
    assert tuple(pyramid.f2.shape) == (2, 32, 44, 44)
    assert tuple(pyramid.f3.shape) == (2, 64, 22, 22)
    assert tuple(pyramid.f4.shape) == (2, 128, 11, 11)


@pytest.mark.parametrize("hw", [(350, 350), (352, 340), (31, 32)])
def test_rejects_non_divisible_input(hw):
    model = TinyBackbone((8, 16, 24, 32))
    with pytest.raises(ValueError, match="divisible by 32"):
        model(torch.rand(1, 3, *hw))


def test_impulse_vs_zero_differs_at_f4():
    model = TinyBackbone((8, 16, 24, 32)).eval()
    zero = torch.zeros(1, 3, 64, 64)
    impulse = torch.zeros(1, 3, 64, 64)
    impulse[0, :, 32, 32] = 1.0
    with torch.no_grad():
        f4_zero = model(zero).f4
        f4_imp = model(impulse).f4
    assert (f4_zero - f4_imp).abs().max() > 0


def test_gradients_reach_all_stages():
    model = TinyBackbone((8, 16, 24, 32))
    pyramid = model(torch.rand(1, 3, 64, 64))
    loss = sum(f.sum() for f in pyramid)
    loss.backward()
    for name, p in model.named_parameters():
        assert p.grad is not None, name


def test_weight_sharing_across_branches():
    model = TinyBackbone((8, 16, 24, 32)).eval()
    n_params = sum(p.numel() for p in model.parameters())
    x = torch.rand(1, 3, 64, 64)
    with torch.no_grad():
        a = model(x)
        b = model(x)
    assert torch.equal(a.f4, b.f4)  # same weights, same result
    assert sum(p.numel() for p in model.parameters()) == n_params


def test_pyramid_adapter_enforces_contract():
    class GoodInner(nn.Module):
        def forward(self, x):
            b, _, h, w = x.shape
            return [torch.zeros(b, c, h // s, w // s)
                    for c, s in zip((4, 8, 12, 16), (4, 8, 16, 32))]

    class BadInner(GoodInner):
        def forward(self, x):
            feats = super().forward(x)
            feats[2] = feats[2][:, :, :-1, :]  # break a spatial size
            return feats

    good = PyramidAdapter(GoodInner(), (4, 8, 12, 16))
    pyramid = good(torch.rand(1, 3, 64, 64))
    assert tuple(pyramid.f3.shape) == (1, 12, 4, 4)
    bad = PyramidAdapter(BadInner(), (4, 8, 12, 16))
    with pytest.raises(ValueError, match="level 3"):
        bad(torch.rand(1, 3, 64, 64))


def test_build_backbone_variants():
    tiny = build_backbone(BackboneConfig(channels=(8, 16, 24, 32)))
    assert isinstance(tiny, TinyBackbone)
    with pytest.raises(ValueError, match="entrypoint"):
        build_backbone(BackboneConfig(variant="pretrained_pvt", channels=(8, 16, 24, 32)))
