"""Exporter contract: format round-trip, determinism, sizing, facets."""

import numpy as np
import pytest
import torch
from PIL import Image

import partcorr
from descriptor_exporter import ExportJob, build_model, export_image, run_job
from descriptor_exporter.cli import main
from descriptor_exporter.vit import VisionTransformer, load_pretrained


@pytest.fixture(scope="module")
def model():
    return build_model(random_init_seed=0)


def write_image(path, size=(64, 64), mode="RGB", seed=0):
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 256, size=size + (3,), dtype=np.uint8)
    if mode == "L":
        arr = arr[..., 0]
    Image.fromarray(arr, mode=mode).save(path)
    return path


def test_export_round_trips_through_engine_loader(tmp_path, model):
    image = write_image(tmp_path / "scene.png")
    job = ExportJob(out_dir=str(tmp_path), layer=3, load_size=64)
    out = export_image(model, image, tmp_path / "scene.afdg", job)
    grid = partcorr.read_descriptor_file(out)
    assert (grid.height_patches, grid.width_patches) == (8, 8)
    assert grid.dim == 384
    assert grid.patch_size == 8 and grid.stride == 8
    assert grid.source_image_size == (64, 64)
    assert np.isfinite(grid.data).all()
    assert grid.saliency is not None
    assert 0.0 <= grid.saliency.min() and grid.saliency.max() <= 1.0


def test_load_size_224_gives_28x28_grid(tmp_path, model):
    image = write_image(tmp_path / "wide.png", size=(48, 96))
    job = ExportJob(out_dir=str(tmp_path), load_size=224)
    out = export_image(model, image, tmp_path / "wide.afdg", job)
    grid = partcorr.read_descriptor_file(out)
    assert (grid.height_patches, grid.width_patches) == (28, 28)
    assert grid.source_image_size == (224, 224)


def test_native_size_crops_to_patch_multiple(tmp_path, model):
    image = write_image(tmp_path / "odd.png", size=(70, 45))
    job = ExportJob(out_dir=str(tmp_path), load_size=0, layer=2)
    out = export_image(model, image, tmp_path / "odd.afdg", job)
    grid = partcorr.read_descriptor_file(out)
    assert (grid.height_patches, grid.width_patches) == (8, 5)
    assert grid.source_image_size == (64, 40)


def test_export_twice_is_byte_identical(tmp_path, model):
    image = write_image(tmp_path / "scene.png")
    job = ExportJob(out_dir=str(tmp_path), load_size=64)
    a = export_image(model, image, tmp_path / "a.afdg", job)
    b = export_image(model, image, tmp_path / "b.afdg", job)
    assert open(a, "rb").read() == open(b, "rb").read()


def test_grayscale_input_is_promoted(tmp_path, model):
    image = write_image(tmp_path / "gray.png", mode="L")
    job = ExportJob(out_dir=str(tmp_path), load_size=64)
    out = export_image(model, image, tmp_path / "gray.afdg", job)
    grid = partcorr.read_descriptor_file(out)
    assert (grid.height_patches, grid.width_patches) == (8, 8)


def test_facets_share_shape_but_differ(tmp_path, model):
    image = write_image(tmp_path / "scene.png")
    grids = {}
    for facet in ("keys", "queries", "values", "tokens"):
        job = ExportJob(out_dir=str(tmp_path), load_size=64, facet=facet, layer=5)
        out = export_image(model, image, tmp_path / f"{facet}.afdg", job)
        grids[facet] = partcorr.read_descriptor_file(out).data
    shapes = {g.shape for g in grids.values()}
    assert shapes == {(8, 8, 384)}
    assert not np.array_equal(grids["keys"], grids["queries"])
    assert not np.array_equal(grids["keys"], grids["tokens"])


def test_checkpoint_round_trip(tmp_path, model):
    # saving and reloading the state dict reproduces the same descriptors
    ckpt = tmp_path / "weights.pth"
    torch.save(model.state_dict(), ckpt)
    reloaded = VisionTransformer()
    load_pretrained(reloaded, str(ckpt))
    reloaded.eval()

    image = write_image(tmp_path / "scene.png")
    job = ExportJob(out_dir=str(tmp_path), load_size=64)
    a = export_image(model, image, tmp_path / "a.afdg", job)
    b = export_image(reloaded, image, tmp_path / "b.afdg", job)
    assert open(a, "rb").read() == open(b, "rb").read()


def test_checkpoint_with_prefixes_loads(tmp_path, model):
    state = {"teacher": {f"backbone.{k}": v for k, v in model.state_dict().items()}}
    ckpt = tmp_path / "wrapped.pth"
    torch.save(state, ckpt)
    reloaded = VisionTransformer()
    load_pretrained(reloaded, str(ckpt))


def test_run_job_over_glob(tmp_path, model):
    for i in range(3):
        write_image(tmp_path / f"img_{i}.png", seed=i)
    job = ExportJob(
        inputs=sorted(str(p) for p in tmp_path.glob("img_*.png")),
        out_dir=str(tmp_path / "out"),
        load_size=64,
    )
    written = run_job(model, job)
    assert len(written) == 3
    for path in written:
        partcorr.read_descriptor_file(path)


def test_cli_random_init(tmp_path):
    write_image(tmp_path / "scene.png")
    args = [
        "--in", str(tmp_path / "scene.png"),
        "--out-dir", str(tmp_path / "out"),
        "--random-init", "--load-size", "64", "--saliency", "--layer", "4",
    ]
    assert main(args) == 0
    grid = partcorr.read_descriptor_file(tmp_path / "out" / "scene.afdg")
    assert grid.saliency is not None


def test_cli_no_matching_inputs(tmp_path):
    assert main(["--in", str(tmp_path / "none_*.png"), "--random-init"]) == 1


def test_invalid_layer_rejected(tmp_path, model):
    image = write_image(tmp_path / "scene.png")
    job = ExportJob(out_dir=str(tmp_path), load_size=64, layer=99)
    with pytest.raises(ValueError):
        export_image(model, image, tmp_path / "x.afdg", job)
