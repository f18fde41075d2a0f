import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from rgbt_tracker.config import RunConfig
from rgbt_tracker.data import SyntheticSpec, synthesize_sequence
from rgbt_tracker.errors import NotFittedError, ShapeMismatchError
from rgbt_tracker.geometry import BoundingBox, iou
from rgbt_tracker.local_attention import (BBoxRegressor, NetworkConfig, SampleStore,
                                          TrackerNetwork, bbox_regress, build_network,
                                          compute_attention_maps, online_update,
                                          train_first_frame)
from rgbt_tracker.local_attention.bbox_reg import apply_deltas, box_deltas
from rgbt_tracker.local_attention.train import FrameImages, extract_features, score_boxes


@pytest.fixture(scope="module")
def trained():
    cfg = RunConfig.desk_scale(init_iterations=40)
    seq = synthesize_sequence(SyntheticSpec(frames=2), 4)
    net = build_network(cfg.network_config(), seed=0)
    result = train_first_frame(net, seq.frames[0], cfg, seed=0)
    return cfg, seq, result


def test_network_output_and_shape_checks():
    net = build_network(NetworkConfig(input_size=75, conv_channels=(4, 4, 4), fc_dim=8, lrn=False))
    x = torch.zeros(3, 3, 75, 75)
    assert net(x, x).shape == (3, 2)
    assert net.features(x, x).shape == (3, net.feature_dim)
    with pytest.raises(ShapeMismatchError):
        net(torch.zeros(3, 3, 30, 30), torch.zeros(3, 3, 30, 30))
    with pytest.raises(ShapeMismatchError):
        net(x, torch.zeros(2, 3, 75, 75))


def test_parameter_groups_partition_the_network():
    net = TrackerNetwork(NetworkConfig(input_size=75, conv_channels=(4, 4, 4), fc_dim=8, n_domains=3))
    ids = {id(p) for p in net.conv_parameters()} | {id(p) for p in net.fc_parameters()}
    assert ids == {id(p) for p in net.parameters()}
    assert len(net.heads) == 3
    shared = TrackerNetwork(NetworkConfig(input_size=75, conv_channels=(4, 4, 4), fc_dim=8,
                                          share_streams=True))
    assert sum(p.numel() for p in shared.parameters()) < sum(p.numel() for p in net.parameters())


def test_network_config_validation():
    with pytest.raises(ValueError):
        NetworkConfig(conv_kernels=(3, 3))
    with pytest.raises(ValueError):
        NetworkConfig(activation="gelu")
    with pytest.raises(ValueError):
        TrackerNetwork(NetworkConfig(input_size=5))


def test_build_network_is_seeded():
    cfg = NetworkConfig.tiny()
    a, b, c = build_network(cfg, 1), build_network(cfg, 1), build_network(cfg, 2)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)
    assert not all(torch.equal(pa, pc) for pa, pc in zip(a.parameters(), c.parameters()))


def test_first_frame_training_descends(trained):
    _, _, result = trained
    trace = result.trace
    assert len(trace) == 40
    assert np.mean(trace[-10:]) < 0.6 * np.mean(trace[:10])


def test_trained_classifier_prefers_target(trained):
    cfg, seq, result = trained
    images = FrameImages(seq.frames[1], cfg.patch_size, cfg.padding)
    gt = seq.frames[1].gt
    background = np.array([[10, 10, gt.w, gt.h], [250, 180, gt.w, gt.h], [200, 20, gt.w, gt.h]])
    boxes = np.concatenate([gt.as_array()[None], background])
    _, scores = score_boxes(result.net, images, boxes)
    assert scores[0, 0] > scores[1:, 0].max()
    prob = torch.softmax(scores, dim=1)[:, 0]
    assert prob[0] > 0.5 > prob[1:].max()


def test_positive_attention_concentrates_on_target(trained):
    cfg, seq, result = trained
    images = FrameImages(seq.frames[0], cfg.patch_size, cfg.padding)
    rgb, thermal = images.crop(seq.frames[0].gt.as_array()[None])
    maps = compute_attention_maps(result.net, (rgb, thermal))
    a = maps.positive[0].detach().numpy()
    n = a.shape[0]
    inner = slice(int(n * 0.2 / 1.4) + 2, n - int(n * 0.2 / 1.4) - 2)
    inside = a[inner, inner].mean()
    ring = np.ones_like(a, bool)
    ring[inner, inner] = False
    assert inside > a[ring].mean()


def test_training_samples_recorded(trained):
    cfg, seq, result = trained
    assert result.pos_boxes.shape == (cfg.init_pos, 4)
    assert result.neg_boxes.shape == (cfg.init_neg, 4)


def test_online_update_freezes_conv_layers(trained):
    cfg, seq, result = trained
    net = result.net
    images = FrameImages(seq.frames[0], cfg.patch_size, cfg.padding)
    gt = seq.frames[0].gt
    store = SampleStore(10, 10)
    pos = np.tile(gt.as_array(), (8, 1))
    neg = np.array([[10, 10, 40, 40], [250, 180, 40, 40]] * 4, dtype=float)
    store.add(extract_features(net, images, pos), extract_features(net, images, neg))
    conv_before = [p.detach().clone() for p in net.conv_parameters()]
    fc_before = [p.detach().clone() for p in net.fc_parameters()]
    trace = online_update(net, store, cfg, seed=3, iterations=5)
    assert len(trace) == 5
    assert all(torch.equal(a, b) for a, b in zip(conv_before, net.conv_parameters()))
    assert not all(torch.equal(a, b) for a, b in zip(fc_before, net.fc_parameters()))
    # restore for the other module-scoped tests
    with torch.no_grad():
        for p, old in zip(net.fc_parameters(), fc_before):
            p.copy_(old)


def test_online_update_with_empty_store_is_noop():
    cfg = RunConfig.desk_scale()
    net = build_network(NetworkConfig.tiny())
    before = [p.detach().clone() for p in net.parameters()]
    assert online_update(net, SampleStore(), cfg) == []
    assert all(torch.equal(a, b) for a, b in zip(before, net.parameters()))


def test_sample_store_fifo_and_window():
    store = SampleStore(pos_capacity=2, neg_capacity=3)
    for k in range(4):
        store.add(torch.full((1, 2), float(k)), torch.full((2, 2), float(k)))
    pos, neg = store.gather()
    assert pos[:, 0].tolist() == [2, 3]
    assert neg[:, 0].tolist() == [1, 1, 2, 2, 3, 3]
    pos, neg = store.gather(last=1)
    assert pos[:, 0].tolist() == [3] and neg[:, 0].tolist() == [3, 3]
    assert len(store) == 5
    assert SampleStore().gather() == (None, None)


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(2, 80), st.floats(2, 80),
       st.floats(-5, 5), st.floats(-5, 5), st.floats(0.5, 2), st.floats(0.5, 2))
def test_deltas_roundtrip(x, y, w, h, dx, dy, sw, sh):
    box = np.array([[x, y, w, h]])
    target = np.array([[x + dx, y + dy, w * sw, h * sh]])
    np.testing.assert_allclose(apply_deltas(box, box_deltas(box, target)), target, atol=1e-9)


def test_identity_regressor_keeps_box():
    reg = BBoxRegressor.identity(5)
    box = BoundingBox(10, 20, 30, 40)
    assert bbox_regress(reg, box, np.ones(5)) == box


def test_unfitted_regressor_raises():
    with pytest.raises(NotFittedError):
        BBoxRegressor().predict(np.ones((1, 3)), [BoundingBox(0, 0, 5, 5)])


def test_regressor_corrects_small_shift():
    rng = np.random.default_rng(0)
    gt = BoundingBox(100, 80, 40, 30)
    boxes = gt.as_array() + np.column_stack([rng.normal(0, 4, (300, 2)), np.zeros((300, 2))])
    deltas = box_deltas(boxes, np.tile(gt.as_array(), (300, 1)))
    mixing = rng.normal(size=(4, 16))
    feats = deltas @ mixing + rng.normal(0, 1e-3, (300, 16))
    reg = BBoxRegressor(alpha=1e-3).fit(feats, boxes, gt)
    shifted = BoundingBox(102, 80, 40, 30)
    f = box_deltas(shifted.as_array()[None], gt.as_array()[None]) @ mixing
    refined = bbox_regress(reg, shifted, f[0])
    assert abs(refined.cx - gt.cx) < 0.5 and abs(refined.cy - gt.cy) < 0.5
    assert iou(refined, gt) > 0.97
    back = BBoxRegressor.from_state_dict(reg.state_dict())
    np.testing.assert_array_equal(back.predict(f, [shifted]), reg.predict(f, [shifted]))


def test_fitted_regressor_on_frame_stays_near_target(trained):
    cfg, seq, result = trained
    images = FrameImages(seq.frames[0], cfg.patch_size, cfg.padding)
    gt = seq.frames[0].gt
    shifted = BoundingBox(gt.x + 2, gt.y, gt.w, gt.h)
    feats = extract_features(result.net, images, shifted.as_array()[None])[0]
    refined = bbox_regress(result.regressor, shifted, feats.double(), images.size)
    assert iou(refined, gt) > 0.8
