"""Wire codec: identities, hand-assembled frames, and fuzz totality."""

import random

import pytest

from sdm_station.broker.packets import (
    NEED_MORE,
    Packet,
    PacketType,
    ProtocolError,
    decode_packet,
    encode_packet,
)


def decode_all(data: bytes):
    pkt, used = decode_packet(data)
    assert used == len(data)
    return pkt


class TestHandAssembled:
    def test_pingreq_bytes(self):
        assert decode_all(bytes([0xC0, 0x00])).type == PacketType.PINGREQ
        assert encode_packet(Packet(PacketType.PINGREQ)) == bytes([0xC0, 0x00])

    def test_publish_wire_bytes(self):
        # PUBLISH "a/b" payload "hi" QoS0, assembled by hand from the framing
        # rules: 0x30, remaining length 7 (topic string 5 + payload 2, no
        # packet id at QoS 0), topic length 3, topic, payload
        wire = bytes([0x30, 0x07, 0x00, 0x03, 0x61, 0x2F, 0x62, 0x68, 0x69])
        pkt = Packet(PacketType.PUBLISH, topic="a/b", payload=b"hi")
        assert encode_packet(pkt) == wire
        out = decode_all(wire)
        assert (out.topic, out.payload, out.qos) == ("a/b", b"hi", 0)

    def test_varint_over_four_bytes_rejected(self):
        with pytest.raises(ProtocolError):
            decode_packet(bytes([0x30, 0xFF, 0xFF, 0xFF, 0xFF, 0x7F]))

    def test_partial_input_needs_more(self):
        wire = encode_packet(Packet(PacketType.PUBLISH, topic="t", payload=b"x" * 50))
        for cut in range(len(wire)):
            assert decode_packet(wire[:cut]) == NEED_MORE

    def test_connect_round_trip(self):
        pkt = Packet(PacketType.CONNECT, client_id="probe", keepalive=30)
        out = decode_all(encode_packet(pkt))
        assert (out.client_id, out.keepalive, out.clean_session) == ("probe", 30, True)

    def test_subscribe_suback_round_trip(self):
        sub = Packet(PacketType.SUBSCRIBE, packet_id=7, topics=[("a/+", 0), ("b/#", 0)])
        out = decode_all(encode_packet(sub))
        assert out.packet_id == 7 and out.topics == [("a/+", 0), ("b/#", 0)]
        ack = Packet(PacketType.SUBACK, packet_id=7, granted_qos=[0, 0x80])
        assert decode_all(encode_packet(ack)).granted_qos == [0, 0x80]

    def test_publish_topic_wildcards_rejected(self):
        wire = encode_packet(Packet(PacketType.PUBLISH, topic="ok", payload=b""))
        bad = wire.replace(b"ok", b"a#")
        with pytest.raises(ProtocolError):
            decode_packet(bad)

    def test_oversized_payload_rejected(self):
        wire = encode_packet(Packet(PacketType.PUBLISH, topic="t",
                                    payload=b"x" * 4000))
        with pytest.raises(ProtocolError):
            decode_packet(wire, max_payload=50)


class TestRoundTripRandomized:
    def test_publish_round_trip_randomized(self):
        rng = random.Random(3)
        for _ in range(2000):
            topic = "/".join("abcxyz"[rng.randrange(6)]
                             for _ in range(rng.randrange(1, 5)))
            payload = rng.randbytes(rng.randrange(0, 300))
            pkt = Packet(PacketType.PUBLISH, topic=topic, payload=payload)
            out = decode_all(encode_packet(pkt))
            assert (out.topic, out.payload) == (topic, payload)


class TestFuzzTotality:
    def test_million_random_frames_never_crash(self):
        # totality: arbitrary bytes produce need-more, a packet, or a
        # protocol error; nothing else may escape
        rng = random.Random(48213)
        for i in range(1_000_000):
            n = rng.randrange(0, 12)
            data = rng.randbytes(n)
            try:
                pkt, used = decode_packet(data)
            except ProtocolError:
                continue
            if pkt is None:
                assert used == 0
            else:
                assert 0 < used <= len(data)

    def test_mutated_valid_frames_never_crash(self):
        # flip bytes of real packets: exercises deeper body parsing paths
        rng = random.Random(99)
        seeds = [
            encode_packet(Packet(PacketType.CONNECT, client_id="fuzz")),
            encode_packet(Packet(PacketType.PUBLISH, topic="a/b/c", payload=b"p" * 40)),
            encode_packet(Packet(PacketType.SUBSCRIBE, packet_id=1,
                                 topics=[("a/#", 0)])),
            encode_packet(Packet(PacketType.UNSUBSCRIBE, packet_id=2,
                                 topics=["a/b"])),
        ]
        for _ in range(100_000):
            data = bytearray(seeds[rng.randrange(len(seeds))])
            for _ in range(rng.randrange(1, 4)):
                data[rng.randrange(len(data))] = rng.randrange(256)
            try:
                decode_packet(bytes(data))
            except ProtocolError:
                pass
