"""The complete transmit/receive cycle: codec -> mapper -> modem -> channel and back.

Transmit and receive channels are distinct objects, so a system can model a
mismatched receiver by configuring them with different parameters.
"""

from __future__ import annotations

import copy
import math

from .channel import Channel
from .codec import Codec
from .config import Component, ConfigWriter, TokenStream, deserialize_component, register
from .core import RandomSource, SymbolBlock
from .mapper import Mapper
from .modem import Modem

__all__ = ["CommSystem", "StageError"]


class StageError(RuntimeError):
    """Failure inside one pipeline stage, tagged with the stage name."""

    def __init__(self, stage: str, error: BaseException) -> None:
        super().__init__(f"{stage}: {error}")
        self.stage = stage


@register
class CommSystem(Component):
    """Wires the pipeline components and validates the alphabet/size chain."""

    category = "system"
    name = "commsys"

    def __init__(
        self,
        codec: Codec,
        mapper: Mapper,
        modem: Modem,
        tx_channel: Channel,
        rx_channel: Channel,
    ) -> None:
        self.codec = codec
        self.mapper = mapper
        self.modem = modem
        self.tx_channel = tx_channel
        self.rx_channel = rx_channel

        mapper.bind(codec.q_out, codec.output_block_size)
        if mapper.q_out != modem.m:
            raise ValueError(
                f"mapper output alphabet {mapper.q_out} does not match modem order {modem.m}"
            )
        for label, chan in (("transmit", tx_channel), ("receive", rx_channel)):
            if getattr(chan, "signal_space") != modem.signal_space:
                raise ValueError(
                    f"{label} channel {chan.name!r} and modem {modem.name!r} disagree on "
                    "signal-space representation"
                )
            if not modem.signal_space and chan.q != modem.m:
                raise ValueError(
                    f"{label} channel alphabet {chan.q} does not match modem alphabet {modem.m}"
                )

    @property
    def input_block_size(self) -> int:
        return self.codec.input_block_size

    @property
    def q_in(self) -> int:
        return self.codec.q_in

    @property
    def channel_symbols_per_frame(self) -> int:
        return self.mapper.n_out

    def info_rate(self) -> float:
        """Information bits per channel symbol (tail and repetition overhead included)."""
        info_bits = self.codec.input_block_size * math.log2(self.codec.q_in)
        return info_bits / self.channel_symbols_per_frame

    def set_parameter(self, p: float) -> None:
        rate = self.info_rate()
        self.tx_channel.set_parameter(p, rate)
        self.rx_channel.set_parameter(p, rate)

    def clone(self) -> "CommSystem":
        """Deep copy with independent component state (decoder buffers, permutations)."""
        return copy.deepcopy(self)

    @staticmethod
    def _stage(name: str, fn, *args):
        try:
            return fn(*args)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc

    def cycle(self, src: SymbolBlock, rng: RandomSource) -> SymbolBlock:
        """One full frame: encode, map, modulate, corrupt, demodulate, unmap, decode."""
        enc = self._stage("codec.encode", self.codec.encode, src)
        self._stage("mapper.advance", self.mapper.advance, rng)
        mapped = self._stage("mapper.transform", self.mapper.transform, enc)
        tx = self._stage("modem.modulate", self.modem.modulate, mapped)
        rx = self._stage("channel.transmit", self.tx_channel.transmit, tx, rng)
        ptable = self._stage("modem.demodulate", self.modem.demodulate, rx, self.rx_channel)
        pin = self._stage("mapper.inverse", self.mapper.inverse, ptable)
        self._stage("codec.init_decoder", self.codec.init_decoder, pin)
        return self._stage("codec.decode_hard", self.codec.decode_hard)

    def description(self) -> str:
        return (
            f"{self.codec.description()} | {self.mapper.description()} | "
            f"{self.modem.description()} | tx {self.tx_channel.description()} | "
            f"rx {self.rx_channel.description()}"
        )

    def write_params(self, w: ConfigWriter) -> None:
        w.child("Codec", self.codec)
        w.child("Mapper", self.mapper)
        w.child("Modem", self.modem)
        w.child("Transmit channel", self.tx_channel)
        w.child("Receive channel", self.rx_channel)

    @classmethod
    def read_params(cls, ts: TokenStream) -> "CommSystem":
        codec = deserialize_component(ts, "codec")
        mapper = deserialize_component(ts, "mapper")
        modem = deserialize_component(ts, "modem")
        tx_channel = deserialize_component(ts, "channel")
        rx_channel = deserialize_component(ts, "channel")
        return cls(codec, mapper, modem, tx_channel, rx_channel)
