"""Encrypted backend: bootstrapped Boolean gates on Concrete (TFHE).

Each gate is a composable Concrete function computing one programmable
bootstrap over a 3-bit lookup domain, so every gate shares a single parameter
set and a single evaluation key. NOT is linear and needs no bootstrap.
"""
from __future__ import annotations

import functools
import hashlib
import secrets
import struct

from blindeval.backend import (
    ClientKey,
    ContainerError,
    EvaluationKey,
    Gate,
    KEY_ID_BYTES,
    SecurityConfig,
)

# per-bootstrap failure probability; thousands of chained gates must all succeed
P_ERROR = 1e-12

_SECURITY_LEVEL = {"tfhe-128": 128, "tfhe-132": 132}


@functools.lru_cache(maxsize=None)
def compiled_module(preset: str = "tfhe-128"):
    """Compile (once per process) the gate module for a parameter preset."""
    from concrete import fhe
    from concrete.fhe.compilation.configuration import SecurityLevel

    def lut3(f):
        return fhe.LookupTable([f(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)])

    and_t = lut3(lambda a, b, _: a & b)
    or_t = lut3(lambda a, b, _: a | b)
    xor_t = lut3(lambda a, b, _: a ^ b)
    mux_t = lut3(lambda s, t, e: t if s else e)

    @fhe.module()
    class Gates:
        @fhe.function({"a": "encrypted", "b": "encrypted"})
        def and_(a, b):
            return and_t[4 * a + 2 * b]

        @fhe.function({"a": "encrypted", "b": "encrypted"})
        def or_(a, b):
            return or_t[4 * a + 2 * b]

        @fhe.function({"a": "encrypted", "b": "encrypted"})
        def xor_(a, b):
            return xor_t[4 * a + 2 * b]

        @fhe.function({"s": "encrypted", "t": "encrypted", "e": "encrypted"})
        def mux(s, t, e):
            return mux_t[4 * s + 2 * t + e]

        @fhe.function({"a": "encrypted"})
        def not_(a):
            return 1 - a

        @fhe.function({"c": "clear"})
        def const(c):
            return fhe.zero() + c

        composition = fhe.AllComposable()

    pairs = [(a, b) for a in (0, 1) for b in (0, 1)]
    triples = [(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)]
    config = fhe.Configuration(
        p_error=P_ERROR, security_level=SecurityLevel(_SECURITY_LEVEL[preset])
    )
    return Gates.compile(
        {
            "and_": pairs,
            "or_": pairs,
            "xor_": pairs,
            "mux": triples,
            "not_": [0, 1],
            "const": [0, 1],
        },
        config,
    )


_FUNCTION = {
    Gate.AND: "and_",
    Gate.OR: "or_",
    Gate.XOR: "xor_",
    Gate.NOT: "not_",
    Gate.MUX: "mux",
}


def _specs_digest(module) -> bytes:
    return hashlib.sha256(module.client.specs.serialize()).digest()


def _pack_header(preset: str, module) -> bytes:
    raw = preset.encode()
    return struct.pack("<H", len(raw)) + raw + _specs_digest(module)


def _unpack_header(native: bytes):
    (n,) = struct.unpack_from("<H", native, 0)
    preset = native[2 : 2 + n].decode()
    if preset not in _SECURITY_LEVEL:
        raise ContainerError(f"unknown parameter preset {preset!r} in key file")
    digest = native[2 + n : 2 + n + 32]
    module = compiled_module(preset)
    if digest != _specs_digest(module):
        raise ContainerError("key was generated for a different circuit build")
    return preset, module, native[2 + n + 32 :]


class TfheEvaluationKey(EvaluationKey):
    backend = "encrypted"

    def __init__(self, key_id: bytes, preset: str, eval_keys):
        self.key_id = key_id
        self.preset = preset
        self._module = compiled_module(preset)
        self._eval_keys = eval_keys

    def apply(self, kind, payloads):
        return self._module.server.run(
            *payloads, evaluation_keys=self._eval_keys, function_name=_FUNCTION[kind]
        )

    def trivial(self, bit):
        return self._module.server.run(
            int(bit), evaluation_keys=self._eval_keys, function_name="const"
        )

    def dump_ciphertext(self, payload):
        return payload.serialize()

    def load_ciphertext(self, data):
        from concrete import fhe

        return fhe.Value.deserialize(data)

    def native_bytes(self):
        return _pack_header(self.preset, self._module) + self._eval_keys.serialize()

    @classmethod
    def from_native(cls, key_id: bytes, native: bytes):
        from concrete import fhe

        preset, _, body = _unpack_header(native)
        return cls(key_id, preset, fhe.EvaluationKeys.deserialize(body))


class TfheClientKey(ClientKey):
    backend = "encrypted"

    def __init__(self, key_id: bytes, preset: str, client):
        self.key_id = key_id
        self.preset = preset
        self._client = client
        self._ek = TfheEvaluationKey(key_id, preset, client.evaluation_keys)

    @property
    def evaluation_key(self):
        return self._ek

    def encrypt(self, bit):
        return self._client.encrypt(int(bit), function_name="not_")

    def decrypt(self, payload):
        return int(self._client.decrypt(payload, function_name="not_"))

    def native_bytes(self):
        return _pack_header(self.preset, self._ek._module) + self._client.keys.serialize()

    @classmethod
    def from_native(cls, key_id: bytes, native: bytes):
        from concrete import fhe

        preset, module, body = _unpack_header(native)
        client = fhe.Client(module.client.specs)
        client.keys = fhe.Keys.deserialize(body)
        return cls(key_id, preset, client)


def generate(config: SecurityConfig) -> TfheClientKey:
    from concrete import fhe

    module = compiled_module(config.parameter_preset)
    if config.insecure_test_mode and config.rng_seed is not None:
        secret_seed = config.rng_seed
        encryption_seed = config.rng_seed ^ 0x5EED
        key_id = hashlib.sha256(b"insecure-test-key" + struct.pack("<Q", config.rng_seed)).digest()
        key_id = key_id[:KEY_ID_BYTES]
    else:
        secret_seed = secrets.randbits(128)
        encryption_seed = secrets.randbits(128)
        key_id = secrets.token_bytes(KEY_ID_BYTES)
    client = fhe.Client(module.client.specs)
    client.keygen(secret_seed=secret_seed, encryption_seed=encryption_seed)
    return TfheClientKey(key_id, config.parameter_preset, client)
