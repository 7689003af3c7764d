import numpy as np
import pytest

from erpamark.bits import BitVector
from erpamark.channel import ChannelModel, ImagePatch
from erpamark.codec import PaintingScheme
from erpamark.framework import (
    PatchAssignment,
    PatchGrid,
    ber,
    crop,
    embed_payload,
    embed_signature,
    embed_signature_bits,
    extract_and_verify,
    extract_payload,
    recompose,
    zbir,
)
from erpamark.images import synthetic_image
from erpamark.phash import phash

CANON = PaintingScheme.dcss(7)


class TestGrid:
    def test_crop_sizes(self):
        img = np.zeros((1024, 1024, 3), np.uint8)
        patches = crop(img, PatchGrid(8, 8))
        assert len(patches) == 64 and all(p.shape == (128, 128) for p in patches)
        assert len(crop(np.zeros((512, 512, 3), np.uint8), PatchGrid(4, 4))) == 16

    def test_row_major_origins(self):
        patches = crop(np.zeros((64, 32, 3), np.uint8), PatchGrid(4, 2))
        assert [p.origin for p in patches[:3]] == [(0, 0), (0, 16), (16, 0)]

    def test_not_divisible(self):
        with pytest.raises(ValueError):
            crop(np.zeros((100, 96, 3), np.uint8), PatchGrid())

    def test_round_trip(self):
        img = synthetic_image(0, 128)
        for g in (PatchGrid(), PatchGrid(4, 4), PatchGrid(1, 1)):
            assert np.array_equal(recompose(crop(img, g), g), img)

    def test_shuffled_patches(self):
        img = synthetic_image(1, 64)
        patches = crop(img, PatchGrid())
        order = np.random.default_rng(0).permutation(len(patches))
        assert np.array_equal(recompose([patches[i] for i in order], PatchGrid()), img)

    def test_missing_patch(self):
        patches = crop(synthetic_image(1, 64), PatchGrid())
        with pytest.raises(ValueError, match="missing"):
            recompose(patches[1:], PatchGrid())

    def test_duplicate_patch(self):
        patches = crop(synthetic_image(1, 64), PatchGrid())
        with pytest.raises(ValueError, match="duplicate"):
            recompose(patches[:-1] + [patches[0]], PatchGrid())

    def test_shape_mismatch(self):
        patches = crop(synthetic_image(1, 128), PatchGrid())
        patches[5] = ImagePatch(np.zeros((8, 8, 3), np.uint8), patches[5].origin)
        with pytest.raises(ValueError):
            recompose(patches, PatchGrid())


class TestAssignment:
    def test_contiguous(self):
        a = PatchAssignment.contiguous(PatchGrid())
        assert a.a_patches == tuple(range(32)) and a.b_patches == tuple(range(32, 64))
        assert a.capacity == 2048

    def test_checkerboard(self):
        a = PatchAssignment.checkerboard(PatchGrid())
        assert sorted(a.a_patches + a.b_patches) == list(range(64))
        assert len(a.a_patches) == 32

    def test_small_grid(self):
        assert PatchAssignment.contiguous(PatchGrid(4, 4)).capacity == 512

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            PatchAssignment((0, 1), (1, 2))


class TestMetrics:
    def test_ber(self):
        a = BitVector.zeros(2048)
        assert ber(a, a) == 0
        assert ber(a, ~a) == 1
        assert ber(a, BitVector(1, 2048)) == pytest.approx(1 / 2048)

    def test_zbir(self):
        assert zbir([True, True]) == 1.0
        assert zbir([True, False]) == 0.5
        with pytest.raises(ValueError):
            zbir([])


class TestPayload:
    def test_capacity_check(self):
        ch = ChannelModel().open()
        with pytest.raises(ValueError):
            embed_payload(np.zeros((64, 64, 3), np.uint8), BitVector(0, 64), ch, CANON, PatchGrid())

    def test_lsb_round_trip(self, decoder_p07):
        img = synthetic_image(2, 128)
        payload = BitVector.from_bits(np.random.default_rng(0).integers(0, 2, 2048))
        ch = ChannelModel().open()
        info = embed_payload(img, payload, ch, CANON, PatchGrid())
        assert all(e.popcount() == 0 for e in info.embed_errors)
        ro = extract_payload(info.image, ch, decoder_p07, PatchGrid())
        assert ro.raw == payload and ro.corrected == payload

    def test_intrinsic_errors_are_cancelled(self, decoder_p07):
        img = np.zeros((64, 64, 3), np.uint8)
        rng = np.random.default_rng(1)
        exact = 0
        for i in range(20):
            ch = ChannelModel("simulated", 0.01, seed=i).open()
            payload = BitVector.from_bits(rng.integers(0, 2, 2048))
            embed_payload(img, payload, ch, CANON, PatchGrid())
            ro = extract_payload(img, ch, decoder_p07, PatchGrid())
            assert ber(payload, ro.corrected) <= ber(payload, ro.raw)
            exact += ro.corrected == payload
        assert exact >= 15

    def test_erpa_off_reads_raw(self):
        img = np.zeros((64, 64, 3), np.uint8)
        ch = ChannelModel("simulated", 0.05, seed=3).open()
        payload = BitVector(12345, 2048)
        info = embed_payload(img, payload, ch, CANON, PatchGrid(), erpa=False)
        assert info.embed_errors == []
        ro = extract_payload(img, ch, None, PatchGrid(), erpa=False)
        assert ro.corrected == ro.raw

    def test_missing_watermark_is_diagnosed(self, decoder_p07):
        ch = ChannelModel("simulated").open()
        ro = extract_payload(np.zeros((64, 64, 3), np.uint8), ch, decoder_p07, PatchGrid())
        assert ro.diagnostics and ro.corrected == BitVector.zeros(2048)


class TestSignature:
    def test_lsb_end_to_end(self, keypair, decoder_p07):
        img = synthetic_image(10, 256)
        ch = ChannelModel().open()
        info = embed_signature(img, keypair.secret, ch, CANON)
        assert info.phash_stable
        rep = extract_and_verify(info.image, keypair.public, ch, decoder_p07, truth=info.signature)
        assert rep.verified and rep.corrected_ber == 0
        assert rep.recovered_signature == info.signature

    def test_simulated_low_intrinsic_verifies(self, keypair, decoder_p07):
        img = synthetic_image(11, 128)
        ch = ChannelModel("simulated", 0.002, seed=5).open()
        info = embed_signature(img, keypair.secret, ch, CANON)
        rep = extract_and_verify(info.image, keypair.public, ch, decoder_p07, truth=info.signature)
        assert rep.raw_ber > 0
        assert rep.verified and rep.corrected_ber == 0

    def test_wrong_key(self, keypair, other_keypair, decoder_p07):
        img = synthetic_image(12, 128)
        ch = ChannelModel().open()
        info = embed_signature(img, keypair.secret, ch, CANON)
        assert not extract_and_verify(info.image, other_keypair.public, ch, decoder_p07).verified

    def test_replay_fails(self, keypair, decoder_p07):
        x, y = synthetic_image(20, 128), synthetic_image(21, 128)
        assert phash(x) != phash(y)
        ch = ChannelModel().open()
        stolen = embed_signature(x, keypair.secret, ch, CANON).signature
        forged = embed_signature_bits(y, stolen, ch, CANON)
        rep = extract_and_verify(forged.image, keypair.public, ch, decoder_p07)
        assert rep.recovered_signature == stolen
        assert not rep.verified

    def test_hamming_fallback(self, keypair, decoder_p07, monkeypatch):
        from erpamark import framework
        from erpamark.phash import PerceptualHash

        img = synthetic_image(13, 128)
        ch = ChannelModel().open()
        info = embed_signature(img, keypair.secret, ch, CANON)
        # pretend the received image hashes one bit away from the signed hash
        near = PerceptualHash(info.phash.bits ^ BitVector(1 << 40, 64))
        monkeypatch.setattr(framework, "phash", lambda _img: near)
        assert not extract_and_verify(info.image, keypair.public, ch, decoder_p07).verified
        rep = extract_and_verify(info.image, keypair.public, ch, decoder_p07, hamming_fallback=True)
        assert rep.verified and rep.matched_phash == info.phash

    def test_small_grid_is_diagnostic_only(self, keypair, decoder_p07):
        img = synthetic_image(14, 128)
        ch = ChannelModel().open()
        info = embed_signature(img, keypair.secret, ch, CANON, grid=PatchGrid(4, 4))
        rep = extract_and_verify(info.image, keypair.public, ch, decoder_p07, grid=PatchGrid(4, 4))
        assert rep.recovered_signature.length == 512
        assert rep.recovered_signature.value == info.signature.value & ((1 << 512) - 1)
        assert not rep.verified and rep.diagnostics

    def test_scheme_mismatch(self, keypair, decoder_p07):
        with pytest.raises(ValueError):
            extract_and_verify(
                np.zeros((64, 64, 3), np.uint8), keypair.public, ChannelModel().open(), decoder_p07,
                scheme=PaintingScheme.nearby(7),
            )

    def test_report_serialization(self, keypair, decoder_p07):
        img = synthetic_image(15, 128)
        ch = ChannelModel().open()
        info = embed_signature(img, keypair.secret, ch, CANON)
        rep = extract_and_verify(info.image, keypair.public, ch, decoder_p07, truth=info.signature)
        d = rep.to_dict()
        assert d["verified"] is True and d["format_version"] == 1
        assert len(d["recovered_signature"]) == 512 and len(d["per_patch_raw_bits"]) == 32
        assert "verified: true" in rep.to_text()


def test_checkerboard_pipeline(keypair, decoder_p07):
    grid = PatchGrid()
    assign = PatchAssignment.checkerboard(grid)
    img = synthetic_image(16, 128)
    ch = ChannelModel().open()
    info = embed_signature(img, keypair.secret, ch, CANON, grid, assign)
    assert extract_and_verify(info.image, keypair.public, ch, decoder_p07, grid, assign).verified
