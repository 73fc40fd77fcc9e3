"""Per-process protocol state machines: broadcast, coin, crusader agreement, consensus."""

from .base import ALL, Context, Output, Step
from .bca import BOT, BcaEngine, Propose, bca_step
from .coin import CoinEngine, CoinTable, ReleaseCoin, coin_step, dealer_setup
from .consensus import ConsensusEngine, CPropose, consensus_step
from .factory import EngineSet, MissingDealer, ProtocolKind, UnknownKind, protocol_factory
from .messages import EncodingError, Kind, Message, decode, encode
from .rb import Broadcast, RbEngine, rb_step
