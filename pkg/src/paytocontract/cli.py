"""Command-line surface: one subcommand per library operation.

State (ledger, filestore) persists as JSONL under ``--state-dir`` so
sessions can resume; scenario subcommands always run against fresh
in-memory state and print an event transcript.  All digests, scalars, and
points are lowercase hex on this surface; addresses render as
``kind:hexdigest``.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path
from random import Random
from typing import Optional

import click

from . import contract as contract_mod
from .chain import FileStore, Ledger, TxOutput, build_transaction, tx_to_json
from .curve import KeyPair, Point, Scalar, random_scalar
from .errors import ProtocolError
from .protocol import (
    MerchantIdentity,
    DlegProof,
    attach_signal,
    merchant_retrieve,
    merchant_scan_signals,
    prove_dh,
    redeem_post,
    signal_value,
    verify_dh,
)
from .scenarios import SCENARIOS, run_scenario
from .wallet import (
    Address,
    DerivationScheme,
    derive_address,
    derive_public,
    derive_script,
    p2sh_address,
    script_from_json,
    script_to_json,
)


@dataclass
class CliConfig:
    state_dir: Path
    fmt: str
    seed: Optional[int]

    def rng(self) -> Optional[Random]:
        return Random(self.seed) if self.seed is not None else None

    def _path(self, name: str) -> Path:
        self.state_dir.mkdir(parents=True, exist_ok=True)
        return self.state_dir / name

    def load_ledger(self) -> Ledger:
        path = self._path("ledger.jsonl")
        return Ledger.from_jsonl(path.read_text()) if path.exists() else Ledger()

    def save_ledger(self, ledger: Ledger):
        self._path("ledger.jsonl").write_text(ledger.to_jsonl())

    def load_filestore(self) -> FileStore:
        path = self._path("filestore.jsonl")
        return FileStore.from_jsonl(path.read_text()) if path.exists() else FileStore()

    def save_filestore(self, fs: FileStore):
        self._path("filestore.jsonl").write_text(fs.to_jsonl())

    def emit(self, obj: dict):
        if self.fmt == "json":
            click.echo(json.dumps(obj, sort_keys=True, separators=(",", ":")))
        else:
            for key in sorted(obj):
                value = obj[key]
                if isinstance(value, (dict, list)):
                    value = json.dumps(value, sort_keys=True)
                click.echo(f"{key}: {value}")


pass_config = click.make_pass_decorator(CliConfig)


@click.group()
@click.option("--state-dir", type=click.Path(path_type=Path), default=Path("./p2c-state"),
              show_default=True, help="Directory for ledger/filestore persistence.")
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json",
              show_default=True, help="Output format.")
@click.option("--seed", type=int, default=None,
              help="Deterministic randomness for reproducible runs.")
@click.pass_context
def cli(ctx, state_dir: Path, fmt: str, seed: Optional[int]):
    """Pay-to-contract payments against a simulated ledger and filestore."""
    ctx.obj = CliConfig(state_dir, fmt, seed)


# -- helpers ----------------------------------------------------------------

def _point(text: str) -> Point:
    return Point.decode(bytes.fromhex(text))


def _address(text: str) -> Address:
    try:
        return Address.parse(text)
    except ValueError as exc:
        raise click.UsageError(f"bad address {text!r}: {exc}")


def _outpoint(text: str):
    txid, _, index = text.rpartition(":")
    return bytes.fromhex(txid), int(index)


def _read_keyfile(path: str) -> KeyPair:
    obj = json.loads(Path(path).read_text())
    return KeyPair.from_private(Scalar(int(obj["private"], 16)))


def _read_contract(path: str):
    return contract_mod.decode_contract(Path(path).read_text().encode())


def _write_contract(c, path: str):
    Path(path).write_text(contract_mod.encode_contract(c).decode())


def _read_script(path: str):
    return script_from_json(json.loads(Path(path).read_text()))


def _fields(pairs) -> dict:
    fields = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep:
            raise click.UsageError(f"field {pair!r} is not name=value")
        fields[name] = value
    return fields


# -- keys and addresses -------------------------------------------------------

@cli.command()
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Write the keypair to this file.")
@pass_config
def keygen(cfg: CliConfig, out: Optional[Path]):
    """Generate a keypair (reproducible with --seed)."""
    pair = KeyPair.from_private(random_scalar(cfg.rng()))
    record = {"private": format(pair.private.value, "064x"),
              "public": pair.public.encode().hex()}
    if out is not None:
        out.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n")
        cfg.emit({"public": record["public"], "written": str(out)})
    else:
        cfg.emit(record)


@cli.group()
def address():
    """Derive addresses and scripts from a public base."""


@address.command("derive")
@click.option("--pubbase", required=True, help="Compressed pubkey hex.")
@click.option("--label", default=None, help="Label text (UTF-8).")
@click.option("--label-hex", default=None, help="Label as raw hex bytes.")
@click.option("--scheme", type=click.Choice([s.value for s in DerivationScheme]),
              default=DerivationScheme.ADDITIVE.value, show_default=True)
@pass_config
def address_derive(cfg: CliConfig, pubbase: str, label: Optional[str],
                   label_hex: Optional[str], scheme: str):
    """Derived pubkey and pay-to-pubkey-hash address for a label."""
    if (label is None) == (label_hex is None):
        raise click.UsageError("give exactly one of --label / --label-hex")
    raw = label.encode() if label is not None else bytes.fromhex(label_hex)
    base = _point(pubbase)
    pub = derive_public(base, raw, DerivationScheme(scheme))
    addr = derive_address(base, raw, DerivationScheme(scheme))
    cfg.emit({"pubkey": pub.encode().hex(), "address": addr.render()})


@address.command("derive-script")
@click.option("--script", "script_path", required=True, type=click.Path(exists=True))
@click.option("--label", default=None)
@click.option("--label-hex", default=None)
@pass_config
def address_derive_script(cfg: CliConfig, script_path: str, label: Optional[str],
                          label_hex: Optional[str]):
    """Derive every pubkey in a base script; prints script JSON and p2sh address."""
    if (label is None) == (label_hex is None):
        raise click.UsageError("give exactly one of --label / --label-hex")
    raw = label.encode() if label is not None else bytes.fromhex(label_hex)
    derived = derive_script(_read_script(script_path), raw)
    cfg.emit({"script": script_to_json(derived),
              "address": p2sh_address(derived).render()})


@address.command("p2sh")
@click.option("--script", "script_path", required=True, type=click.Path(exists=True))
@pass_config
def address_p2sh(cfg: CliConfig, script_path: str):
    """Pay-to-script-hash address of a script file."""
    cfg.emit({"address": p2sh_address(_read_script(script_path)).render()})


# -- contracts ----------------------------------------------------------------

@cli.group()
def contract():
    """Build, sign, verify, and transform contracts."""


@contract.command("template")
@click.option("--merchant-key", required=True, type=click.Path(exists=True))
@click.option("--static", "static_pairs", multiple=True, help="name=value static field.")
@click.option("--dynamic-key", default=None, help="Tracking pubkey hex for dynamic fields.")
@click.option("--out", required=True, type=click.Path(path_type=Path))
@pass_config
def contract_template(cfg: CliConfig, merchant_key: str, static_pairs, dynamic_key, out: Path):
    """Create a signed contract template (static fields under merchant/)."""
    pair = _read_keyfile(merchant_key)
    template = contract_mod.build_template(
        pair.public, _fields(static_pairs), cfg.rng(),
        dynamic_signing_key=_point(dynamic_key) if dynamic_key else None,
    )
    paths = ["merchant/pubkey"] + [f"merchant/{n}" for n in _fields(static_pairs)]
    template = contract_mod.sign_fields(template, pair.private, paths)
    _write_contract(template, str(out))
    cfg.emit({"written": str(out), "signed_paths": paths})


@contract.command("build")
@click.option("--template", "template_path", required=True, type=click.Path(exists=True))
@click.option("--field", "field_pairs", multiple=True, help="name=value order field.")
@click.option("--out", required=True, type=click.Path(path_type=Path))
@pass_config
def contract_build(cfg: CliConfig, template_path: str, field_pairs, out: Path):
    """Fill order fields into a template."""
    built = contract_mod.build_contract(_read_contract(template_path),
                                        _fields(field_pairs), cfg.rng())
    _write_contract(built, str(out))
    cfg.emit({"written": str(out),
              "contract_hash": contract_mod.contract_hash(built).hex()})


@contract.command("sign")
@click.argument("contract_path", type=click.Path(exists=True))
@click.option("--key", "key_path", required=True, type=click.Path(exists=True))
@click.option("--path", "paths", multiple=True, required=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@pass_config
def contract_sign(cfg: CliConfig, contract_path: str, key_path: str, paths, out: Path):
    """Sign subtree digests at the given field paths."""
    signed = contract_mod.sign_fields(_read_contract(contract_path),
                                      _read_keyfile(key_path).private, list(paths))
    _write_contract(signed, str(out))
    cfg.emit({"written": str(out), "signed_paths": list(paths)})


@contract.command("verify")
@click.argument("contract_path", type=click.Path(exists=True))
@pass_config
def contract_verify(cfg: CliConfig, contract_path: str):
    """Check every signature; nonzero exit when any is invalid."""
    report = contract_mod.verify_contract(_read_contract(contract_path))
    cfg.emit({
        "ok": report.ok,
        "static": dict(report.static),
        "dynamic": dict(report.dynamic),
        "redacted": list(report.redacted_paths),
        "encrypted": list(report.encrypted_paths),
        "warnings": list(report.warnings),
    })
    if not report.ok:
        sys.exit(1)


@contract.command("redact")
@click.argument("contract_path", type=click.Path(exists=True))
@click.option("--path", "paths", multiple=True, required=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@pass_config
def contract_redact(cfg: CliConfig, contract_path: str, paths, out: Path):
    """Replace subtrees by their digests; the contract hash is unchanged."""
    c = _read_contract(contract_path)
    for p in paths:
        c = contract_mod.redact(c, p)
    _write_contract(c, str(out))
    cfg.emit({"written": str(out), "redacted": list(paths),
              "contract_hash": contract_mod.contract_hash(c).hex()})


@contract.command("encrypt-leaf")
@click.argument("contract_path", type=click.Path(exists=True))
@click.option("--path", "path", required=True)
@click.option("--recipient", required=True, help="Recipient pubkey hex.")
@click.option("--out", required=True, type=click.Path(path_type=Path))
@pass_config
def contract_encrypt_leaf(cfg: CliConfig, contract_path: str, path: str, recipient: str, out: Path):
    """Encrypt one leaf to a pubkey (do this before signing/paying)."""
    c = contract_mod.encrypt_leaf(_read_contract(contract_path), path,
                                  _point(recipient), cfg.rng())
    _write_contract(c, str(out))
    cfg.emit({"written": str(out), "encrypted": path,
              "contract_hash": contract_mod.contract_hash(c).hex()})


@contract.command("hash")
@click.argument("contract_path", type=click.Path(exists=True))
@pass_config
def contract_hash_cmd(cfg: CliConfig, contract_path: str):
    """Root digest (stable under redaction)."""
    cfg.emit({"contract_hash": contract_mod.contract_hash(_read_contract(contract_path)).hex()})


@contract.command("payment-address")
@click.argument("contract_path", type=click.Path(exists=True))
@pass_config
def contract_payment_address(cfg: CliConfig, contract_path: str):
    """The address the contract determines."""
    c = _read_contract(contract_path)
    cfg.emit({"address": contract_mod.payment_address(c).render()})


# -- chain ----------------------------------------------------------------------

@cli.group()
def chain():
    """Operate the simulated ledger."""


@chain.command("faucet")
@click.option("--to", required=True, help="Address kind:hexdigest.")
@click.option("--amount", required=True, type=int)
@pass_config
def chain_faucet(cfg: CliConfig, to: str, amount: int):
    """Mint a coinbase output (test setup)."""
    ledger = cfg.load_ledger()
    tx = ledger.faucet([TxOutput(_address(to), amount)])
    cfg.save_ledger(ledger)
    cfg.emit({"txid": tx.txid.hex(), "index": 0, "amount": amount})


@chain.command("send")
@click.option("--key", "key_path", required=True, type=click.Path(exists=True))
@click.option("--outpoint", "outpoints", multiple=True, required=True, help="txid:index.")
@click.option("--to", required=True)
@click.option("--amount", required=True, type=int)
@click.option("--change", default=None, help="Change address kind:hexdigest.")
@pass_config
def chain_send(cfg: CliConfig, key_path: str, outpoints, to: str, amount: int, change):
    """Spend outputs owned by --key."""
    ledger = cfg.load_ledger()
    key = _read_keyfile(key_path).private
    spends = [(txid, idx, key) for txid, idx in map(_outpoint, outpoints)]
    outputs = [TxOutput(_address(to), amount)]
    if change is not None:
        total = sum(ledger.utxo[(t, i)].amount for t, i, _ in spends if (t, i) in ledger.utxo)
        if total > amount:
            outputs.append(TxOutput(_address(change), total - amount))
    tx = build_transaction(ledger, spends, outputs)
    ledger.broadcast(tx)
    cfg.save_ledger(ledger)
    cfg.emit({"txid": tx.txid.hex(), "outputs": len(tx.outputs)})


@chain.command("scan")
@click.option("--address", "addr_text", required=True)
@pass_config
def chain_scan(cfg: CliConfig, addr_text: str):
    """All outputs ever paid to an address."""
    ledger = cfg.load_ledger()
    hits = [{"txid": t.hex(), "index": i, "amount": a}
            for t, i, a in ledger.scan_address(_address(addr_text))]
    cfg.emit({"address": addr_text, "outputs": hits})


@chain.command("show")
@click.argument("txid", required=False)
@pass_config
def chain_show(cfg: CliConfig, txid: Optional[str]):
    """Dump the ledger, or one transaction."""
    ledger = cfg.load_ledger()
    if txid is not None:
        tx = ledger.get_transaction(bytes.fromhex(txid))
        if tx is None:
            raise ProtocolError("no such transaction", txid)
        cfg.emit({"txid": txid, "transaction": tx_to_json(tx)})
    else:
        cfg.emit({"transactions": len(ledger),
                  "utxos": len(ledger.utxo),
                  "issued": ledger.total_issued})


# -- signaling, proofs, redemption ---------------------------------------------

@cli.group()
def signal():
    """Blockchain signaling between customer keys and a merchant key."""


@signal.command("attach")
@click.option("--key", "key_path", required=True, type=click.Path(exists=True),
              help="Signal key; must also own the spent outputs.")
@click.option("--merchant", required=True, help="Merchant pubkey hex.")
@click.option("--outpoint", "outpoints", multiple=True, required=True)
@click.option("--amount", type=int, default=0, show_default=True, help="Signal output amount.")
@click.option("--contract", "contract_path", type=click.Path(exists=True), default=None,
              help="Also pay this contract in the same transaction.")
@click.option("--payment-amount", type=int, default=None)
@click.option("--variant", type=click.Choice(["merchant_controlled", "customer_controlled"]),
              default="merchant_controlled", show_default=True)
@pass_config
def signal_attach(cfg: CliConfig, key_path: str, merchant: str, outpoints, amount: int,
                  contract_path, payment_amount, variant: str):
    """Broadcast a transaction carrying a signal output (optionally plus payment)."""
    from .protocol import SignalVariant

    ledger = cfg.load_ledger()
    pair = _read_keyfile(key_path)
    merchant_pub = _point(merchant)
    spends = [(txid, idx, pair.private) for txid, idx in map(_outpoint, outpoints)]
    outputs = []
    if contract_path is not None:
        c = _read_contract(contract_path)
        pay = contract_mod.order_price(c) if payment_amount is None else payment_amount
        outputs.append(TxOutput(contract_mod.payment_address(c), pay))
    outputs, value = attach_signal(outputs, pair, merchant_pub, amount,
                                   SignalVariant(variant))
    tx = build_transaction(ledger, spends, outputs)
    ledger.broadcast(tx)
    cfg.save_ledger(ledger)
    cfg.emit({"txid": tx.txid.hex(), "value": format(value.value, "064x")})


@signal.command("scan")
@click.option("--key", "key_path", required=True, type=click.Path(exists=True),
              help="Merchant key file.")
@click.option("--watermark", type=int, default=0, show_default=True)
@click.option("--include-customer-controlled", is_flag=True, default=False)
@pass_config
def signal_scan(cfg: CliConfig, key_path: str, watermark: int, include_customer_controlled: bool):
    """Detect signals addressed to the merchant key."""
    ledger = cfg.load_ledger()
    identity = MerchantIdentity(_read_keyfile(key_path))
    records = merchant_scan_signals(identity, ledger, watermark, include_customer_controlled)
    cfg.emit({"signals": [
        {"signal_pubkey": r.signal_pubkey.encode().hex(),
         "value": format(r.value.value, "064x"),
         "txid": r.txid.hex()} for r in records
    ]})


@cli.group()
def dh():
    """Discrete-log-equality proofs for disputed signals."""


@dh.command("prove")
@click.option("--key", "key_path", required=True, type=click.Path(exists=True))
@click.option("--merchant", required=True)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@pass_config
def dh_prove(cfg: CliConfig, key_path: str, merchant: str, out: Optional[Path]):
    """Prove the shared point for (signal key, merchant) without revealing the key."""
    pair = _read_keyfile(key_path)
    proof = prove_dh(pair.private, _point(merchant), cfg.rng())
    record = {
        "shared": proof.shared.encode().hex(),
        "commit_g": proof.commit_g.encode().hex(),
        "commit_p": proof.commit_p.encode().hex(),
        "response": format(proof.response.value, "064x"),
        "signal_pubkey": pair.public.encode().hex(),
    }
    if out is not None:
        out.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n")
        cfg.emit({"written": str(out), "shared": record["shared"]})
    else:
        cfg.emit(record)


@dh.command("verify")
@click.option("--proof", "proof_path", required=True, type=click.Path(exists=True))
@click.option("--signal-pub", default=None, help="Override the proof file's signal pubkey.")
@click.option("--merchant", required=True)
@pass_config
def dh_verify(cfg: CliConfig, proof_path: str, signal_pub: Optional[str], merchant: str):
    """Check a proof; exit 0 when valid, 1 when not."""
    obj = json.loads(Path(proof_path).read_text())
    proof = DlegProof(
        _point(obj["shared"]), _point(obj["commit_g"]), _point(obj["commit_p"]),
        Scalar(int(obj["response"], 16)),
    )
    signal_point = _point(signal_pub or obj["signal_pubkey"])
    ok = verify_dh(proof, signal_point, _point(merchant))
    cfg.emit({"valid": ok})
    if not ok:
        sys.exit(1)


@cli.group()
def redeem():
    """Contract redemption over the simulated filestore."""


@redeem.command("post")
@click.option("--contract", "contract_path", required=True, type=click.Path(exists=True))
@click.option("--key", "key_path", required=True, type=click.Path(exists=True),
              help="Signal key used in the paying transaction.")
@click.option("--merchant", required=True)
@pass_config
def redeem_post_cmd(cfg: CliConfig, contract_path: str, key_path: str, merchant: str):
    """Encrypt the contract under the signalled value and post it."""
    fs = cfg.load_filestore()
    pair = _read_keyfile(key_path)
    value = signal_value(pair.private, _point(merchant))
    filename = redeem_post(_read_contract(contract_path), value, fs, cfg.rng())
    cfg.save_filestore(fs)
    cfg.emit({"filename": filename.hex()})


@redeem.command("retrieve")
@click.option("--key", "key_path", required=True, type=click.Path(exists=True),
              help="Merchant key file.")
@click.option("--signal-pub", required=True, help="Signal pubkey from a scan.")
@pass_config
def redeem_retrieve(cfg: CliConfig, key_path: str, signal_pub: str):
    """Fetch and decrypt the contract behind a detected signal."""
    ledger = cfg.load_ledger()
    fs = cfg.load_filestore()
    identity = MerchantIdentity(_read_keyfile(key_path))
    point = _point(signal_pub)
    matches = [r for r in merchant_scan_signals(identity, ledger)
               if r.signal_pubkey == point]
    if not matches:
        raise ProtocolError("no signal from that key")
    retrieved, status = merchant_retrieve(identity, matches[0], fs, ledger)
    result = {"state": status.state.value}
    if retrieved is not None:
        result["contract_hash"] = contract_mod.contract_hash(retrieved).hex()
    if status.paying_txid is not None:
        result["txid"] = status.paying_txid.hex()
    cfg.emit(result)


# -- scenarios -------------------------------------------------------------------

@cli.command()
@click.argument("name", type=click.Choice(SCENARIOS))
@click.option("--yes", is_flag=True, default=False,
              help="Skip the interactive approval prompt.")
@pass_config
def scenario(cfg: CliConfig, name: str, yes: bool):
    """Run a full multi-actor walkthrough against fresh state."""
    approve = None
    if name == "basic" and not yes:
        def approve(c, alias):
            click.echo("--- contract for approval ---", err=True)
            click.echo(json.dumps(contract_mod.contract_to_json(c), indent=2, sort_keys=True), err=True)
            click.echo(f"--- merchant alias: {alias} ---", err=True)
            return click.confirm("approve this contract?", err=True)

    for event in run_scenario(name, cfg.seed, approve):
        cfg.emit(event)


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="p2c")
    except ProtocolError as exc:
        click.echo(json.dumps({"error": exc.code, "message": str(exc)}, sort_keys=True))
        sys.exit(1)


if __name__ == "__main__":
    main()
