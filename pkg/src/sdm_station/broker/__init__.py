from .packets import (
    Packet,
    PacketType,
    ProtocolError,
    NEED_MORE,
    decode_packet,
    encode_packet,
)
from .trie import SubscriptionTrie, topic_matches
from .server import Broker, BrokerConfig

__all__ = [
    "Packet",
    "PacketType",
    "ProtocolError",
    "NEED_MORE",
    "decode_packet",
    "encode_packet",
    "SubscriptionTrie",
    "topic_matches",
    "Broker",
    "BrokerConfig",
]
