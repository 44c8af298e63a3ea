"""Primitive layer: hashing, authenticated encryption, deterministic
public-key keyword encryption, and MACs.

All operations are pure given their inputs. Randomness is drawn from
``secrets`` unless an explicit ``rng`` (anything with ``randbytes``) is
supplied; the simulation harness injects a seeded generator so whole
runs are reproducible.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
from dataclasses import dataclass, field
from enum import Enum

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import IntegrityFailure

DIGEST_BYTES = 32
MAC_BYTES = 32
NONCE_BYTES = 12

# Alias types: a digest and a MAC tag are plain 32-byte strings.
Digest = bytes
MacTag = bytes


class Framework(Enum):
    """Profile selecting per-framework key lengths and message discipline."""

    I = "I"
    II = "II"

    @property
    def key_bytes(self) -> int:
        return 16 if self is Framework.I else 32

    @property
    def key_bits(self) -> int:
        return 8 * self.key_bytes


@dataclass
class OpCounters:
    """Tallies of primitive invocations, read by the overhead model."""

    hash_calls: int = 0
    derive_calls: int = 0
    indexed_hash_calls: int = 0
    sym_encrypt_calls: int = 0
    sym_decrypt_calls: int = 0
    pub_encrypt_calls: int = 0

    def reset(self) -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, 0)


counters = OpCounters()


@dataclass(frozen=True)
class SymKey:
    """Symmetric key with a role tag (root | derived | pairwise)."""

    data: bytes
    role: str = "derived"

    def __post_init__(self) -> None:
        if len(self.data) not in (16, 32):
            raise ValueError(f"key must be 128 or 256 bits, got {8 * len(self.data)}")

    def __len__(self) -> int:
        return len(self.data)


@dataclass(frozen=True)
class KeyPair:
    """X25519 key pair for deterministic keyword encryption."""

    public: bytes
    private: bytes


def random_bytes(n: int, rng=None) -> bytes:
    """n random octets from rng.randbytes, or from the OS CSPRNG."""
    if rng is None:
        return secrets.token_bytes(n)
    return rng.randbytes(n)


def hash_bytes(data: bytes) -> Digest:
    """The shared public hash primitive (SHA-256, 32-octet digests)."""
    counters.hash_calls += 1
    return hashlib.sha256(data).digest()


def indexed_hash(index: int, data: bytes) -> Digest:
    """Member ``index`` of the hash family: the digest of a fixed-width
    big-endian 4-octet index prefix followed by the payload."""
    if index < 1:
        raise ValueError("hash family index starts at 1")
    counters.indexed_hash_calls += 1
    return hash_bytes(index.to_bytes(4, "big") + data)


def sym_encrypt(key: SymKey, plaintext: bytes, associated: bytes, rng=None) -> bytes:
    """AES-GCM with a random 12-octet nonce prefix.

    Output layout: nonce || ciphertext+tag. The associated data is
    authenticated but not transmitted.
    """
    counters.sym_encrypt_calls += 1
    nonce = random_bytes(NONCE_BYTES, rng)
    return nonce + AESGCM(key.data).encrypt(nonce, plaintext, associated)


def sym_decrypt(key: SymKey, ciphertext: bytes, associated: bytes) -> bytes:
    """Inverse of :func:`sym_encrypt`.

    Raises IntegrityFailure on tampering or a wrong key; the two cases
    are indistinguishable by contract.
    """
    counters.sym_decrypt_calls += 1
    if len(ciphertext) < NONCE_BYTES + 16:
        raise IntegrityFailure("ciphertext too short")
    nonce, sealed = ciphertext[:NONCE_BYTES], ciphertext[NONCE_BYTES:]
    try:
        return AESGCM(key.data).decrypt(nonce, sealed, associated)
    except InvalidTag as exc:
        raise IntegrityFailure("authenticated decryption failed") from exc


def _keystream(seed: bytes, length: int) -> bytes:
    out = bytearray()
    block = 0
    while len(out) < length:
        out += hashlib.sha256(seed + block.to_bytes(4, "big")).digest()
        block += 1
    return bytes(out[:length])


def _xor(data: bytes, stream: bytes) -> bytes:
    return bytes(a ^ b for a, b in zip(data, stream))


def det_pub_encrypt(public: bytes, keyword: bytes) -> bytes:
    """Deterministic public-key encryption of a keyword.

    X25519 hybrid with the ephemeral scalar derived from the message:
    the same (public key, keyword) pair always produces the same
    ciphertext, which is what lets filters match encrypted queries.
    Output layout: ephemeral public point (32 octets) || masked keyword.
    """
    if not keyword:
        raise ValueError("keyword must be non-empty")
    counters.pub_encrypt_calls += 1
    scalar = hashlib.sha256(b"det-pub-eph\x00" + public + keyword).digest()
    ephemeral = X25519PrivateKey.from_private_bytes(scalar)
    point = ephemeral.public_key().public_bytes_raw()
    shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(public))
    stream = _keystream(b"det-pub-mask\x00" + shared + point, len(keyword))
    return point + _xor(keyword, stream)


def det_pub_decrypt(private: bytes, ciphertext: bytes) -> bytes:
    """Invert :func:`det_pub_encrypt` with the private scalar."""
    if len(ciphertext) < 33:
        raise ValueError("ciphertext shorter than point + one octet")
    point, masked = ciphertext[:32], ciphertext[32:]
    shared = X25519PrivateKey.from_private_bytes(private).exchange(
        X25519PublicKey.from_public_bytes(point)
    )
    stream = _keystream(b"det-pub-mask\x00" + shared + point, len(masked))
    return _xor(masked, stream)


def mac_compute(key: SymKey, message: bytes) -> MacTag:
    """HMAC-SHA256 tag over the message."""
    return hmac.new(key.data, message, hashlib.sha256).digest()


def mac_verify(key: SymKey, message: bytes, tag: MacTag) -> bool:
    return hmac.compare_digest(mac_compute(key, message), tag)


def gen_root_key(profile: Framework, rng=None) -> SymKey:
    """Fresh root key at the profile's length (128 or 256 bits)."""
    return SymKey(random_bytes(profile.key_bytes, rng), role="root")


def gen_pairwise_key(profile: Framework, rng=None) -> SymKey:
    """Fresh pairwise key shared by one pair of principals."""
    return SymKey(random_bytes(profile.key_bytes, rng), role="pairwise")


def gen_keypair(rng=None) -> KeyPair:
    """Fresh X25519 key pair for keyword encryption."""
    private = random_bytes(32, rng)
    public = X25519PrivateKey.from_private_bytes(private).public_key().public_bytes_raw()
    return KeyPair(public=public, private=private)
