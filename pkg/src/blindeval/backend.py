"""Gate-level evaluation backends.

Two interchangeable implementations share one interface:

* ``"clear"`` computes gates on plaintext bits. It is the bit-exact oracle the
  test-suite runs everything against.
* ``"encrypted"`` evaluates every gate as a bootstrapped TFHE operation (see
  :mod:`blindeval.tfhe`).

Keys are split the usual way. A :class:`ClientKey` can encrypt and decrypt; an
:class:`EvaluationKey` can only run gates. Work on ciphertexts goes through an
:class:`Evaluator` (evaluation key only) and key-holder work through a
:class:`Client`. Both report into a shared :class:`BackendStats`, which is how
the absence of decryptions during training is measured.
"""
from __future__ import annotations

import abc
import enum
import json
import random
import secrets
import struct
import threading
import time
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

KEY_ID_BYTES = 16


class BackendError(Exception):
    """Base class for backend failures."""


class KeyMismatchError(BackendError):
    """A ciphertext was used with a key it was not produced under."""


class ArityError(BackendError, ValueError):
    pass


class TrustBoundaryError(BackendError):
    """An operation requiring the client key was attempted without it."""


class ContainerError(BackendError, ValueError):
    """A serialized key/dataset/model container is malformed."""


class Gate(str, enum.Enum):
    AND = "AND"
    OR = "OR"
    XOR = "XOR"
    NOT = "NOT"
    MUX = "MUX"  # inputs: select, then, else


ARITY = {Gate.NOT: 1, Gate.AND: 2, Gate.OR: 2, Gate.XOR: 2, Gate.MUX: 3}

BACKENDS = ("clear", "encrypted")
PRESETS = ("tfhe-128", "tfhe-132")


@dataclass(frozen=True)
class SecurityConfig:
    backend: str = "clear"
    parameter_preset: str = "tfhe-128"
    rng_seed: int | None = None
    insecure_test_mode: bool = False

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        if self.parameter_preset not in PRESETS:
            raise ValueError(
                f"unknown parameter preset {self.parameter_preset!r}; expected one of {PRESETS}"
            )
        if self.rng_seed is not None and not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")


@dataclass(frozen=True, eq=False, slots=True)
class CipherBit:
    """Opaque handle to one encrypted Boolean.

    ``eq=False``: handles compare by identity only, never by plaintext.
    """

    payload: object
    key_id: bytes

    def __repr__(self):
        return f"CipherBit(key={self.key_id.hex()[:8]})"


class BitWord(Sequence):
    """Fixed-width unsigned integer as CipherBits, index 0 least significant."""

    __slots__ = ("bits",)

    def __init__(self, bits: Iterable[CipherBit]):
        self.bits = tuple(bits)
        if not self.bits:
            raise ValueError("BitWord width must be at least 1")

    @property
    def width(self) -> int:
        return len(self.bits)

    def __len__(self):
        return len(self.bits)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self.bits[i]
        return self.bits[i]

    def __iter__(self) -> Iterator[CipherBit]:
        return iter(self.bits)

    def __add__(self, other):
        # concatenation, low word first
        return BitWord(self.bits + tuple(other))

    def __repr__(self):
        return f"BitWord(width={self.width})"


class BackendStats:
    """Monotone counters shared by an Evaluator and a Client.

    ``blind_ops`` counts top-level blind comparisons/selections/orderings
    (an ordering's internal comparison is not counted separately).
    """

    BLIND_KINDS = ("comparisons", "selections", "orderings")

    def __init__(self):
        self._lock = threading.Lock()
        self.gate_counts: dict[str, int] = {g.value: 0 for g in Gate}
        self.decrypt_calls = 0
        self.encrypt_calls = 0
        self.blind_ops: dict[str, int] = {k: 0 for k in self.BLIND_KINDS}
        self.wall_time_per_op: dict[str, float] = {g.value: 0.0 for g in Gate}

    def record_gate(self, kind: Gate, seconds: float) -> None:
        with self._lock:
            self.gate_counts[kind.value] += 1
            self.wall_time_per_op[kind.value] += seconds

    def record_decrypt(self, n: int = 1) -> None:
        with self._lock:
            self.decrypt_calls += n

    def record_encrypt(self, n: int = 1) -> None:
        with self._lock:
            self.encrypt_calls += n

    def record_blind(self, kind: str) -> None:
        with self._lock:
            self.blind_ops[kind] += 1

    @property
    def total_gates(self) -> int:
        return sum(self.gate_counts.values())

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "gate_counts": dict(self.gate_counts),
                "total_gates": sum(self.gate_counts.values()),
                "decrypt_calls": self.decrypt_calls,
                "encrypt_calls": self.encrypt_calls,
                "blind_ops": dict(self.blind_ops),
                "wall_time_per_op": dict(self.wall_time_per_op),
            }

    def diff(self, before: dict) -> dict:
        """Counter deltas since an earlier :meth:`snapshot`."""
        now = self.snapshot()
        return {
            "gate_counts": {k: v - before["gate_counts"][k] for k, v in now["gate_counts"].items()},
            "total_gates": now["total_gates"] - before["total_gates"],
            "decrypt_calls": now["decrypt_calls"] - before["decrypt_calls"],
            "encrypt_calls": now["encrypt_calls"] - before["encrypt_calls"],
            "blind_ops": {k: v - before["blind_ops"][k] for k, v in now["blind_ops"].items()},
        }

    def to_json(self, **extra) -> str:
        return json.dumps({**self.snapshot(), **extra}, indent=2, sort_keys=True)


# --------------------------------------------------------------------------
# keys


class EvaluationKey(abc.ABC):
    """Public evaluation material. Runs gates; cannot decrypt."""

    backend: str
    key_id: bytes

    @abc.abstractmethod
    def apply(self, kind: Gate, payloads: Sequence[object]) -> object: ...

    @abc.abstractmethod
    def trivial(self, bit: int) -> object:
        """Noiseless encryption of a public constant."""

    @abc.abstractmethod
    def dump_ciphertext(self, payload: object) -> bytes: ...

    @abc.abstractmethod
    def load_ciphertext(self, data: bytes) -> object: ...

    @abc.abstractmethod
    def native_bytes(self) -> bytes: ...


class ClientKey(abc.ABC):
    """Secret key material. Encrypts and decrypts."""

    backend: str
    key_id: bytes

    @property
    @abc.abstractmethod
    def evaluation_key(self) -> EvaluationKey: ...

    @abc.abstractmethod
    def encrypt(self, bit: int) -> object: ...

    @abc.abstractmethod
    def decrypt(self, payload: object) -> int: ...

    @abc.abstractmethod
    def native_bytes(self) -> bytes: ...


@dataclass(frozen=True)
class KeyPair:
    client_key: ClientKey
    evaluation_key: EvaluationKey


class ClearEvaluationKey(EvaluationKey):
    backend = "clear"

    def __init__(self, key_id: bytes):
        self.key_id = key_id

    def apply(self, kind, payloads):
        if kind is Gate.AND:
            return payloads[0] & payloads[1]
        if kind is Gate.OR:
            return payloads[0] | payloads[1]
        if kind is Gate.XOR:
            return payloads[0] ^ payloads[1]
        if kind is Gate.NOT:
            return 1 - payloads[0]
        s, t, e = payloads
        return t if s else e

    def trivial(self, bit):
        return int(bit)

    def dump_ciphertext(self, payload):
        return bytes([payload])

    def load_ciphertext(self, data):
        if len(data) != 1 or data[0] > 1:
            raise ContainerError("clear ciphertext must be a single 0/1 byte")
        return data[0]

    def native_bytes(self):
        return b""


class ClearClientKey(ClientKey):
    backend = "clear"

    def __init__(self, key_id: bytes):
        self.key_id = key_id
        self._ek = ClearEvaluationKey(key_id)

    @property
    def evaluation_key(self):
        return self._ek

    def encrypt(self, bit):
        return int(bit)

    def decrypt(self, payload):
        return int(payload)

    def native_bytes(self):
        return b""


def keygen(config: SecurityConfig | None = None) -> KeyPair:
    """Generate a fresh key pair for ``config.backend``."""
    config = config or SecurityConfig()
    if config.backend == "clear":
        rng = random.Random(config.rng_seed) if config.rng_seed is not None else secrets.SystemRandom()
        key_id = bytes(rng.getrandbits(8) for _ in range(KEY_ID_BYTES))
        ck = ClearClientKey(key_id)
        return KeyPair(ck, ck.evaluation_key)
    from blindeval import tfhe

    ck = tfhe.generate(config)
    return KeyPair(ck, ck.evaluation_key)


# --------------------------------------------------------------------------
# client / evaluator


class Client:
    """Key-holder side: encryption and decryption. Every decryption is counted."""

    def __init__(self, client_key: ClientKey, stats: BackendStats | None = None):
        if not isinstance(client_key, ClientKey):
            raise TrustBoundaryError("a client key is required to encrypt or decrypt")
        self.key = client_key
        self.stats = stats if stats is not None else BackendStats()

    @property
    def backend(self) -> str:
        return self.key.backend

    def encrypt_bit(self, b: int) -> CipherBit:
        if b not in (0, 1, True, False):
            raise ValueError(f"plaintext bit must be 0 or 1, got {b!r}")
        self.stats.record_encrypt()
        return CipherBit(self.key.encrypt(int(b)), self.key.key_id)

    def decrypt_bit(self, c: CipherBit) -> int:
        if c.key_id != self.key.key_id:
            raise KeyMismatchError("ciphertext was not encrypted under this client key")
        self.stats.record_decrypt()
        return self.key.decrypt(c.payload)

    def encrypt_bits(self, bits: Iterable[int]) -> list[CipherBit]:
        return [self.encrypt_bit(b) for b in bits]

    def decrypt_bits(self, bits: Iterable[CipherBit]) -> list[int]:
        return [self.decrypt_bit(b) for b in bits]

    def encrypt_word(self, value: int, width: int) -> BitWord:
        if width < 1:
            raise ValueError("word width must be at least 1")
        if not 0 <= value < 2**width:
            raise ValueError(f"{value} does not fit in {width} unsigned bits")
        return BitWord(self.encrypt_bit((value >> i) & 1) for i in range(width))

    def decrypt_word(self, word: BitWord) -> int:
        if len(word) == 0:
            raise ValueError("word width must be at least 1")
        return sum(self.decrypt_bit(b) << i for i, b in enumerate(word))


class Evaluator:
    """Server side: gate evaluation under an evaluation key only."""

    def __init__(self, evaluation_key: EvaluationKey, stats: BackendStats | None = None):
        if isinstance(evaluation_key, ClientKey):
            evaluation_key = evaluation_key.evaluation_key
        if not isinstance(evaluation_key, EvaluationKey):
            raise TypeError("Evaluator needs an EvaluationKey")
        self.key = evaluation_key
        self.stats = stats if stats is not None else BackendStats()

    @property
    def backend(self) -> str:
        return self.key.backend

    def gate(self, kind: Gate | str, *inputs: CipherBit) -> CipherBit:
        kind = Gate(kind)
        if len(inputs) != ARITY[kind]:
            raise ArityError(f"{kind.value} takes {ARITY[kind]} inputs, got {len(inputs)}")
        kid = self.key.key_id
        for c in inputs:
            if not isinstance(c, CipherBit):
                raise TypeError(f"gate inputs must be CipherBits, got {type(c).__name__}")
            if c.key_id != kid:
                raise KeyMismatchError("gate inputs belong to a different key")
        t0 = time.perf_counter()
        out = self.key.apply(kind, [c.payload for c in inputs])
        self.stats.record_gate(kind, time.perf_counter() - t0)
        return CipherBit(out, kid)

    def and_(self, a, b):
        return self.gate(Gate.AND, a, b)

    def or_(self, a, b):
        return self.gate(Gate.OR, a, b)

    def xor(self, a, b):
        return self.gate(Gate.XOR, a, b)

    def not_(self, a):
        return self.gate(Gate.NOT, a)

    def mux(self, s, t, e):
        return self.gate(Gate.MUX, s, t, e)

    def constant(self, bit: int) -> CipherBit:
        return CipherBit(self.key.trivial(int(bit)), self.key.key_id)

    def constant_word(self, value: int, width: int) -> BitWord:
        if not 0 <= value < 2**width:
            raise ValueError(f"{value} does not fit in {width} unsigned bits")
        return BitWord(self.constant((value >> i) & 1) for i in range(width))

    def dump_bit(self, c: CipherBit) -> bytes:
        if c.key_id != self.key.key_id:
            raise KeyMismatchError("ciphertext belongs to a different key")
        return self.key.dump_ciphertext(c.payload)

    def load_bit(self, data: bytes) -> CipherBit:
        return CipherBit(self.key.load_ciphertext(data), self.key.key_id)


# --------------------------------------------------------------------------
# BEFK key files

KEY_MAGIC = b"BEFK"
KEY_VERSION = 1
_KIND_CLIENT = b"C"
_KIND_EVAL = b"E"


def _pack_str(s: str) -> bytes:
    raw = s.encode()
    return struct.pack("<H", len(raw)) + raw


def _unpack_str(buf: bytes, pos: int) -> tuple[str, int]:
    (n,) = struct.unpack_from("<H", buf, pos)
    pos += 2
    return buf[pos : pos + n].decode(), pos + n


def key_to_bytes(key: ClientKey | EvaluationKey) -> bytes:
    kind = _KIND_CLIENT if isinstance(key, ClientKey) else _KIND_EVAL
    return (
        KEY_MAGIC
        + struct.pack("<I", KEY_VERSION)
        + _pack_str(key.backend)
        + kind
        + key.key_id
        + key.native_bytes()
    )


def key_from_bytes(buf: bytes) -> ClientKey | EvaluationKey:
    if buf[:4] != KEY_MAGIC:
        raise ContainerError("not a key file (bad magic)")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != KEY_VERSION:
        raise ContainerError(f"unsupported key file version {version}")
    backend, pos = _unpack_str(buf, 8)
    kind = buf[pos : pos + 1]
    key_id = buf[pos + 1 : pos + 1 + KEY_ID_BYTES]
    native = buf[pos + 1 + KEY_ID_BYTES :]
    if kind not in (_KIND_CLIENT, _KIND_EVAL) or len(key_id) != KEY_ID_BYTES:
        raise ContainerError("corrupt key header")
    if backend == "clear":
        ck = ClearClientKey(key_id)
        return ck if kind == _KIND_CLIENT else ck.evaluation_key
    if backend == "encrypted":
        from blindeval import tfhe

        if kind == _KIND_CLIENT:
            return tfhe.TfheClientKey.from_native(key_id, native)
        return tfhe.TfheEvaluationKey.from_native(key_id, native)
    raise ContainerError(f"unknown backend {backend!r} in key file")


def save_key(path: str | Path, key: ClientKey | EvaluationKey) -> None:
    Path(path).write_bytes(key_to_bytes(key))


def load_key(path: str | Path) -> ClientKey | EvaluationKey:
    return key_from_bytes(Path(path).read_bytes())
