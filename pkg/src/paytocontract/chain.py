"""Deterministic in-process stand-ins for the two public mediums.

``Ledger`` is an append-only UTXO transaction record with signature-checked
spends -- no blocks, mining, or consensus, because the protocol only needs
a public record.  ``FileStore`` is a write-once filesystem keyed by 32-byte
digest filenames.

Both serialize as newline-delimited canonical JSON with integers rendered
as big-endian hex, which keeps txids bit-stable across save/load.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from .curve import G, Point, Scalar, Signature, ecdsa_sign, ecdsa_verify, hash160, sha256
from .errors import ProtocolError
from .wallet import Address, Script

MAX_AMOUNT = 2 ** 64 - 1

# an output pays either an address or an explicit pubkey (pay-to-pubkey)
PayTarget = Union[Address, Point]


@dataclass(frozen=True)
class TxOutput:
    payto: PayTarget
    amount: int

    def __post_init__(self):
        if not 0 <= self.amount <= MAX_AMOUNT:
            raise ValueError("amount out of range")
        if isinstance(self.payto, Point) and self.payto.is_identity():
            raise ValueError("cannot pay to the identity point")


@dataclass(frozen=True)
class TxInput:
    """Spend of an existing output.

    Address-hash and pay-to-pubkey outputs are unlocked by ``pubkey`` +
    ``signature``; script-hash outputs by the revealed ``redeem_script``
    plus its threshold of ``signatures``.
    """

    prev_txid: bytes
    index: int
    pubkey: Optional[Point] = None
    signature: Optional[Signature] = None
    redeem_script: Optional[Script] = None
    signatures: Tuple[Signature, ...] = ()

    def __post_init__(self):
        if len(self.prev_txid) != 32 or self.index < 0:
            raise ValueError("bad outpoint")


@dataclass(frozen=True)
class Transaction:
    inputs: Tuple[TxInput, ...]
    outputs: Tuple[TxOutput, ...]
    txid: bytes
    coinbase_tag: Optional[int] = None  # uniquifies faucet transactions

    @classmethod
    def assemble(
        cls,
        inputs: Sequence[TxInput],
        outputs: Sequence[TxOutput],
        coinbase_tag: Optional[int] = None,
    ) -> Transaction:
        txid = sha256(tx_preimage(inputs, outputs, coinbase_tag))
        return cls(tuple(inputs), tuple(outputs), txid, coinbase_tag)


def _hex_int(value: int) -> str:
    return format(value, "x")


def _payto_to_json(payto: PayTarget) -> dict:
    if isinstance(payto, Address):
        return {"digest": payto.digest.hex(), "kind": payto.kind}
    return {"kind": "p2pk", "pubkey": payto.encode().hex()}


def _payto_from_json(obj: dict) -> PayTarget:
    if obj["kind"] == "p2pk":
        return Point.decode(bytes.fromhex(obj["pubkey"]))
    return Address(obj["kind"], bytes.fromhex(obj["digest"]))


def _input_to_json(inp: TxInput, include_sigs: bool) -> dict:
    obj = {"index": _hex_int(inp.index), "prev_txid": inp.prev_txid.hex()}
    if inp.redeem_script is not None:
        obj["script"] = inp.redeem_script.serialize().hex()
        if include_sigs:
            obj["signatures"] = [s.to_bytes().hex() for s in inp.signatures]
    else:
        obj["pubkey"] = inp.pubkey.encode().hex()
        if include_sigs and inp.signature is not None:
            obj["signature"] = inp.signature.to_bytes().hex()
    return obj


def _input_from_json(obj: dict) -> TxInput:
    prev_txid = bytes.fromhex(obj["prev_txid"])
    index = int(obj["index"], 16)
    if "script" in obj:
        script = Script.deserialize(bytes.fromhex(obj["script"]))
        sigs = tuple(Signature.from_bytes(bytes.fromhex(s)) for s in obj.get("signatures", []))
        return TxInput(prev_txid, index, redeem_script=script, signatures=sigs)
    sig = obj.get("signature")
    return TxInput(
        prev_txid,
        index,
        pubkey=Point.decode(bytes.fromhex(obj["pubkey"])),
        signature=Signature.from_bytes(bytes.fromhex(sig)) if sig else None,
    )


def tx_to_json(tx: Transaction, include_sigs: bool = True) -> dict:
    obj = {
        "inputs": [_input_to_json(i, include_sigs) for i in tx.inputs],
        "outputs": [
            {"amount": _hex_int(o.amount), "payto": _payto_to_json(o.payto)} for o in tx.outputs
        ],
    }
    if tx.coinbase_tag is not None:
        obj["coinbase"] = _hex_int(tx.coinbase_tag)
    return obj


def tx_from_json(obj: dict) -> Transaction:
    inputs = tuple(_input_from_json(i) for i in obj["inputs"])
    outputs = tuple(
        TxOutput(_payto_from_json(o["payto"]), int(o["amount"], 16)) for o in obj["outputs"]
    )
    tag = obj.get("coinbase")
    return Transaction.assemble(inputs, outputs, int(tag, 16) if tag is not None else None)


def tx_preimage(
    inputs: Sequence[TxInput],
    outputs: Sequence[TxOutput],
    coinbase_tag: Optional[int] = None,
) -> bytes:
    """Canonical serialization excluding signatures; hashing it yields the txid."""
    stub = Transaction(tuple(inputs), tuple(outputs), b"\x00" * 32, coinbase_tag)
    return json.dumps(tx_to_json(stub, include_sigs=False), sort_keys=True, separators=(",", ":")).encode()


def transaction_pubkeys(tx: Transaction) -> List[Point]:
    """Every explicit pubkey the transaction exposes, in serialization order.

    Input pubkeys, pubkeys inside revealed redeem scripts, and pay-to-pubkey
    outputs all count; address outputs carry only hashes and do not.
    """
    points: List[Point] = []
    for inp in tx.inputs:
        if inp.pubkey is not None:
            points.append(inp.pubkey)
        if inp.redeem_script is not None:
            points.extend(inp.redeem_script.pubkeys())
    for out in tx.outputs:
        if isinstance(out.payto, Point):
            points.append(out.payto)
    return points


class Ledger:
    """Append-only transaction record with an unspent-output set.

    Single-writer: mutations are serialized through one lock; reads operate
    on values that are never mutated in place.
    """

    def __init__(self):
        self.transactions: List[Transaction] = []
        self.utxo: Dict[Tuple[bytes, int], TxOutput] = {}
        self.pubkey_index: Dict[Point, List[bytes]] = {}
        self.total_issued = 0
        self._spent: set = set()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.transactions)

    # -- mutation ----------------------------------------------------------

    def faucet(self, outputs: Sequence[TxOutput]) -> Transaction:
        """Mint a coinbase transaction (test/demo setup only)."""
        with self._lock:
            tx = Transaction.assemble((), outputs, coinbase_tag=len(self.transactions))
            self._commit(tx)
            self.total_issued += sum(o.amount for o in outputs)
            return tx

    def broadcast(self, tx: Transaction) -> Transaction:
        """Validate and accept; raises ProtocolError on any rule violation."""
        if not tx.inputs:
            raise ProtocolError("coinbase only via faucet")
        with self._lock:
            self._validate(tx)
            self._commit(tx)
            return tx

    def _validate(self, tx: Transaction):
        preimage = tx_preimage(tx.inputs, tx.outputs, tx.coinbase_tag)
        if sha256(preimage) != tx.txid:
            raise ProtocolError("invalid txid")
        seen = set()
        input_total = 0
        for inp in tx.inputs:
            outpoint = (inp.prev_txid, inp.index)
            if outpoint in seen or outpoint in self._spent:
                raise ProtocolError("spent outpoint", f"{inp.prev_txid.hex()}:{inp.index}")
            if outpoint not in self.utxo:
                raise ProtocolError("missing utxo", f"{inp.prev_txid.hex()}:{inp.index}")
            seen.add(outpoint)
            prev = self.utxo[outpoint]
            self._check_authorization(inp, prev.payto, preimage)
            input_total += prev.amount
        if input_total < sum(o.amount for o in tx.outputs):
            raise ProtocolError("insufficient funds")

    @staticmethod
    def _check_authorization(inp: TxInput, payto: PayTarget, preimage: bytes):
        if isinstance(payto, Point):
            if inp.pubkey != payto:
                raise ProtocolError("key does not match output")
            if inp.signature is None or not ecdsa_verify(inp.pubkey, preimage, inp.signature):
                raise ProtocolError("invalid signature")
            return
        if payto.kind == "p2pkh":
            if inp.pubkey is None or hash160(inp.pubkey.encode()) != payto.digest:
                raise ProtocolError("key does not match output")
            if inp.signature is None or not ecdsa_verify(inp.pubkey, preimage, inp.signature):
                raise ProtocolError("invalid signature")
            return
        # p2sh: reveal the script, then satisfy its multisig threshold
        if inp.redeem_script is None or hash160(inp.redeem_script.serialize()) != payto.digest:
            raise ProtocolError("script does not match output")
        params = inp.redeem_script.multisig_params()
        if params is None:
            raise ProtocolError("unsupported script")
        m, _, pubkeys = params
        if len(inp.signatures) != m:
            raise ProtocolError("invalid signature", f"need exactly {m} signatures")
        unused = list(pubkeys)
        for sig in inp.signatures:
            for candidate in unused:
                if ecdsa_verify(candidate, preimage, sig):
                    unused.remove(candidate)
                    break
            else:
                raise ProtocolError("invalid signature")

    def _commit(self, tx: Transaction):
        self.transactions.append(tx)
        for inp in tx.inputs:
            outpoint = (inp.prev_txid, inp.index)
            del self.utxo[outpoint]
            self._spent.add(outpoint)
        for i, out in enumerate(tx.outputs):
            self.utxo[(tx.txid, i)] = out
        for point in transaction_pubkeys(tx):
            self.pubkey_index.setdefault(point, []).append(tx.txid)

    # -- queries -----------------------------------------------------------

    def scan_address(self, addr: Address) -> List[Tuple[bytes, int, int]]:
        """All outputs ever paid to ``addr`` (spent or not), in ledger order."""
        hits = []
        for tx in self.transactions:
            for i, out in enumerate(tx.outputs):
                if out.payto == addr:
                    hits.append((tx.txid, i, out.amount))
        return hits

    def list_pubkeys(self) -> Iterator[Tuple[Point, bytes]]:
        """Every explicit pubkey on the record, paired with its transaction."""
        for tx in self.transactions:
            for point in transaction_pubkeys(tx):
                yield point, tx.txid

    def get_transaction(self, txid: bytes) -> Optional[Transaction]:
        for tx in self.transactions:
            if tx.txid == txid:
                return tx
        return None

    def is_spent(self, txid: bytes, index: int) -> bool:
        return (txid, index) in self._spent

    # -- persistence ---------------------------------------------------------

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(tx_to_json(tx), sort_keys=True, separators=(",", ":")) + "\n"
            for tx in self.transactions
        )

    @classmethod
    def from_jsonl(cls, text: str) -> Ledger:
        """Rebuild by replaying every record through full validation."""
        ledger = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            tx = tx_from_json(json.loads(line))
            if tx.coinbase_tag is not None:
                ledger.faucet(tx.outputs)
            else:
                ledger.broadcast(tx)
        return ledger


def _resolve_spend(ledger: Ledger, txid: bytes, index: int) -> TxOutput:
    out = ledger.utxo.get((txid, index))
    if out is None:
        raise ProtocolError("missing utxo", f"{txid.hex()}:{index}")
    return out


def build_transaction(
    ledger: Ledger,
    spends: Sequence[Tuple[bytes, int, Scalar]],
    outputs: Sequence[TxOutput],
) -> Transaction:
    """Spend address/pubkey outputs with their matching keys and sign every input."""
    inputs = []
    total = 0
    keys = []
    for txid, index, key in spends:
        prev = _resolve_spend(ledger, txid, index)
        pub = _spend_pubkey(prev.payto, key)
        inputs.append(TxInput(txid, index, pubkey=pub))
        keys.append(key)
        total += prev.amount
    if total < sum(o.amount for o in outputs):
        raise ProtocolError("insufficient funds")
    preimage = tx_preimage(inputs, outputs)
    signed = [
        TxInput(i.prev_txid, i.index, pubkey=i.pubkey, signature=ecdsa_sign(k, preimage))
        for i, k in zip(inputs, keys)
    ]
    return Transaction.assemble(signed, outputs)


def _spend_pubkey(payto: PayTarget, key: Scalar) -> Point:
    pub = G ** key
    if isinstance(payto, Point):
        if pub != payto:
            raise ProtocolError("key does not match output")
    elif payto.kind == "p2pkh":
        if hash160(pub.encode()) != payto.digest:
            raise ProtocolError("key does not match output")
    else:
        raise ProtocolError("key does not match output", "p2sh outputs need a script spend")
    return pub


def build_script_spend(
    ledger: Ledger,
    spends: Sequence[Tuple[bytes, int, Sequence[Scalar], Script]],
    outputs: Sequence[TxOutput],
) -> Transaction:
    """Spend p2sh outputs by revealing each script and signing with enough keys."""
    inputs = []
    total = 0
    keysets = []
    for txid, index, keys, script in spends:
        prev = _resolve_spend(ledger, txid, index)
        if not isinstance(prev.payto, Address) or prev.payto.kind != "p2sh":
            raise ProtocolError("script does not match output", "not a p2sh output")
        if hash160(script.serialize()) != prev.payto.digest:
            raise ProtocolError("script does not match output")
        inputs.append(TxInput(txid, index, redeem_script=script))
        keysets.append(tuple(keys))
        total += prev.amount
    if total < sum(o.amount for o in outputs):
        raise ProtocolError("insufficient funds")
    preimage = tx_preimage(inputs, outputs)
    signed = [
        TxInput(
            i.prev_txid,
            i.index,
            redeem_script=i.redeem_script,
            signatures=tuple(ecdsa_sign(k, preimage) for k in keys),
        )
        for i, keys in zip(inputs, keysets)
    ]
    return Transaction.assemble(signed, outputs)


class FileStore:
    """Write-once distributed filesystem: 32-byte digest filenames -> bytes."""

    def __init__(self):
        self.files: Dict[bytes, bytes] = {}
        self._lock = threading.Lock()

    def put(self, name: bytes, data: bytes):
        if len(name) != 32:
            raise ValueError("filename must be a 32-byte digest")
        with self._lock:
            if name in self.files:
                raise ProtocolError("filename exists", name.hex())
            self.files[name] = bytes(data)

    def get(self, name: bytes) -> Optional[bytes]:
        return self.files.get(name)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps({"data": data.hex(), "name": name.hex()}, sort_keys=True, separators=(",", ":")) + "\n"
            for name, data in self.files.items()
        )

    @classmethod
    def from_jsonl(cls, text: str) -> FileStore:
        store = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            store.put(bytes.fromhex(obj["name"]), bytes.fromhex(obj["data"]))
        return store
