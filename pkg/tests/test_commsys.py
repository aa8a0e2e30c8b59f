import numpy as np
import pytest

from conftest import random_system

from commsim.channel import Awgn, Qsc
from commsim.codec import Mapcc, RepetitionCodec, Uncoded
from commsim.commsys import CommSystem, StageError
from commsim.core import RandomSource, SymbolBlock
from commsim.fsm import Nrcc
from commsim.mapper import MapDividing, MapStraight
from commsim.modem import DirectModem, Mpsk


def uncoded_bpsk(n=256):
    return CommSystem(Uncoded(2, n), MapStraight(), Mpsk(2), Awgn(), Awgn())


class TestWiring:
    def test_alphabet_chain_validated(self):
        with pytest.raises(ValueError):
            CommSystem(Uncoded(4, 8), MapStraight(), Mpsk(2), Awgn(), Awgn())
        with pytest.raises(ValueError):
            CommSystem(Uncoded(2, 8), MapStraight(), DirectModem(4), Qsc(4), Qsc(4))
        with pytest.raises(ValueError):  # signal modem on an abstract channel
            CommSystem(Uncoded(2, 8), MapStraight(), Mpsk(2), Qsc(2), Qsc(2))
        with pytest.raises(ValueError):  # channel alphabet mismatch
            CommSystem(Uncoded(4, 8), MapStraight(), DirectModem(4), Qsc(8), Qsc(4))
        with pytest.raises(ValueError):  # dividing factor inconsistent with codec
            CommSystem(Uncoded(8, 8), MapDividing(16, 2), Mpsk(2), Awgn(), Awgn())

    def test_randomized_mismatches_rejected(self):
        rng = np.random.default_rng(50)
        rejected = 0
        for _ in range(50):
            sys_ = random_system(rng)
            # perturb exactly one link of the chain
            if rng.random() < 0.5 and sys_.codec.q_out == 2:
                bad_modem = DirectModem(3) if sys_.modem.signal_space else Mpsk(4)
                try:
                    CommSystem(sys_.codec, MapStraight(), bad_modem,
                               sys_.tx_channel, sys_.rx_channel)
                except ValueError:
                    rejected += 1
            else:
                try:
                    CommSystem(Uncoded(sys_.codec.q_out + 1, 8), sys_.mapper, sys_.modem,
                               sys_.tx_channel, sys_.rx_channel)
                except ValueError:
                    rejected += 1
        assert rejected == 50

    def test_dividing_chain(self):
        sys_ = CommSystem(Uncoded(256, 4), MapDividing(256, 2), Mpsk(2), Awgn(), Awgn())
        assert sys_.channel_symbols_per_frame == 32
        assert sys_.info_rate() == pytest.approx(1.0)  # 8 bits per symbol / 8 channel bits


class TestInfoRate:
    def test_uncoded_bpsk(self):
        assert uncoded_bpsk().info_rate() == pytest.approx(1.0)

    def test_repetition(self):
        sys_ = CommSystem(RepetitionCodec(2, 64, 3), MapStraight(), Mpsk(2), Awgn(), Awgn())
        assert sys_.info_rate() == pytest.approx(1 / 3)

    def test_nasa_frame(self):
        sys_ = CommSystem(
            Mapcc(Nrcc([["1011011", "1111001"]]), 8160), MapStraight(), Mpsk(2),
            Awgn(), Awgn(),
        )
        assert sys_.info_rate() == pytest.approx(8160 / 16332)


class TestCycle:
    def test_noiseless_qsc_identity(self):
        sys_ = CommSystem(Uncoded(2, 64), MapStraight(), DirectModem(2), Qsc(2), Qsc(2))
        sys_.set_parameter(0.0)
        rng = RandomSource(1)
        src = SymbolBlock(2, rng.integers(2, 64))
        assert sys_.cycle(src, rng) == src

    def test_awgn_small_sigma_identity(self):
        sys_ = uncoded_bpsk()
        sys_.tx_channel.set_sigma(1e-4)
        sys_.rx_channel.set_sigma(1e-4)
        rng = RandomSource(2)
        src = SymbolBlock(2, rng.integers(2, 256))
        assert sys_.cycle(src, rng) == src

    def test_laplacian_high_snr_identity(self):
        from commsim.channel import Laplacian

        sys_ = CommSystem(Uncoded(2, 256), MapStraight(), Mpsk(2), Laplacian(), Laplacian())
        sys_.set_parameter(30.0)
        rng = RandomSource(10)
        src = SymbolBlock(2, rng.integers(2, 256))
        assert sys_.cycle(src, rng) == src

    def test_reproducible(self):
        src = SymbolBlock(2, RandomSource(3).integers(2, 256))
        outs = []
        for _ in range(2):
            sys_ = uncoded_bpsk()
            sys_.set_parameter(2.0)
            outs.append(sys_.cycle(src, RandomSource(77)))
        assert outs[0] == outs[1]

    def test_ber_matches_theory_statistically(self):
        from commsim.core import qfunc

        sys_ = uncoded_bpsk(4096)
        sys_.set_parameter(6.8)
        rng = RandomSource(4)
        errs = trials = 0
        for _ in range(200):
            src = SymbolBlock(2, rng.integers(2, 4096))
            dec = sys_.cycle(src, rng)
            errs += int(np.count_nonzero(src.data != dec.data))
            trials += 4096
        p = errs / trials
        theory = qfunc(np.sqrt(2 * 10 ** 0.68))
        sigma = np.sqrt(theory * (1 - theory) / trials)
        assert abs(p - theory) < 5 * sigma

    def test_mismatched_receiver(self):
        # corruption follows the transmit channel parameter, posterior the receive one
        sys_ = CommSystem(Uncoded(2, 4096), MapStraight(), DirectModem(2), Qsc(2), Qsc(2))
        sys_.tx_channel.set_parameter(0.1)
        sys_.rx_channel.set_parameter(0.2)
        rng = RandomSource(5)
        src = SymbolBlock(2, rng.integers(2, 4096))
        dec = sys_.cycle(src, rng)
        flip_rate = np.count_nonzero(src.data != dec.data) / 4096
        assert abs(flip_rate - 0.1) < 0.02  # tx parameter governs corruption
        table = sys_.modem.demodulate(SymbolBlock(2, [0]), sys_.rx_channel)
        assert np.allclose(table.p[0], [0.8, 0.2])  # rx parameter governs statistics

    def test_stage_error_tagging(self):
        sys_ = uncoded_bpsk(16)
        sys_.set_parameter(1.0)
        with pytest.raises(StageError, match="codec.encode"):
            sys_.cycle(SymbolBlock(2, [0, 1]), RandomSource(6))

    def test_unset_parameter_stage_error(self):
        sys_ = uncoded_bpsk(16)
        with pytest.raises(StageError, match="channel.transmit"):
            sys_.cycle(SymbolBlock(2, RandomSource(7).integers(2, 16)), RandomSource(7))


class TestClone:
    def test_clone_independent(self):
        sys_ = uncoded_bpsk(32)
        sys_.set_parameter(3.0)
        other = sys_.clone()
        rng1, rng2 = RandomSource(8), RandomSource(8)
        src = SymbolBlock(2, RandomSource(9).integers(2, 32))
        assert sys_.cycle(src, rng1) == other.cycle(src, rng2)
        # decoder state does not leak between clones
        assert other.codec._R is not None and sys_.codec._R is not None
        assert other.codec._R is not sys_.codec._R
