"""Capability vouchers, release gates, and participation credits.

Vouchers are steward-issued constraints on a (capability, boundary) pair.
They live as entry lineages: the issuance entry plus revision entries with
ids suffixed `:rev<k>`, each carrying the next status. Gate checks read the
latest revision of every lineage and are pure over a snapshot.

Credits turn measurable ledger events into auditable attribution. Accrual is
deliberately conservative: a quality gate demands the triggering test
actually flipped a suite verdict, a persistence gate demands the test has
been exercised across enough releases, per-beneficiary caps suppress whole
events rather than partially filling them, and creditsFor links make rerun
accrual idempotent.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Any

from .canonical import canonical_json, compute_hash
from .errors import IllegalTransition, InvalidPolicy, UnauthorizedRole, UnknownTest
from .graph import entries_of, redacted_targets
from .harness import detect_regressions, fold_suite
from .model import (
    CREDIT_EVENT_KINDS,
    VOUCHER_TRANSITIONS,
    ActorRef,
    CreditPayload,
    EntryEnvelope,
    EntryType,
    LinkSet,
    TriggeringEvent,
    VoucherPayload,
    format_timestamp,
    lineage_base,
    parse_timestamp,
)

_SLUG_KEEP = "abcdefghijklmnopqrstuvwxyz0123456789-"

DEFAULT_ALLOW = "noApplicableVoucher-defaultAllow"


def _slug(text: str) -> str:
    out = "".join(c if c in _SLUG_KEEP else "-" for c in str(text).lower())
    while "--" in out:
        out = out.replace("--", "-")
    return out.strip("-") or "x"


def _now() -> str:
    return format_timestamp(datetime.now(timezone.utc))


def _in_window(stamp: str, window: tuple[str, str]) -> bool:
    t = parse_timestamp(stamp)
    return parse_timestamp(window[0]) <= t <= parse_timestamp(window[1])


# ---------------------------------------------------------------------------
# voucher lifecycle

def _voucher_lineages(entries: list[EntryEnvelope]) -> dict[str, list[EntryEnvelope]]:
    """Voucher entries grouped by lineage base, ledger order, redactions out."""
    hidden = redacted_targets(entries)
    lineages: dict[str, list[EntryEnvelope]] = {}
    for entry in entries:
        if entry.entry_type is EntryType.VOUCHER and entry.id not in hidden:
            lineages.setdefault(lineage_base(entry.id)[0], []).append(entry)
    return lineages


def issue_voucher(ledger: Any, payload: Any, *, voucher_id: str | None = None,
                  links: LinkSet | None = None, created_at: str | None = None,
                  signer: Any = None) -> EntryEnvelope:
    """Append a new voucher lineage in status issued.

    The steward must hold the communitySteward role, every condition's
    required test must already be in the ledger, and the initial status must
    be issued; later statuses arrive through transition_voucher.
    """
    if not isinstance(payload, VoucherPayload):
        payload = VoucherPayload.from_doc(payload)
    if payload.steward.role != "communitySteward":
        raise UnauthorizedRole(
            f"vouchers are issued by communitySteward, not {payload.steward.role!r}")
    entries = entries_of(ledger)
    hidden = redacted_targets(entries)
    tests = {e.id for e in entries
             if e.entry_type is EntryType.TEST and e.id not in hidden}
    for condition in payload.conditions:
        if condition.required_test_id not in tests:
            raise UnknownTest(
                f"voucher condition requires unknown test {condition.required_test_id!r}")
    if payload.status != "issued":
        raise IllegalTransition(
            f"a new voucher lineage starts as issued, got {payload.status!r}")
    if voucher_id is None:
        prefix = f"pl:voucher:{_slug(payload.capability)}:"
        taken = {e.id for e in entries}
        seq = 1
        while f"{prefix}{seq:03d}" in taken:
            seq += 1
        voucher_id = f"{prefix}{seq:03d}"
    entry = EntryEnvelope(
        id=voucher_id,
        entry_type=EntryType.VOUCHER,
        created_at=created_at or _now(),
        actor=payload.steward,
        payload=payload,
        links=links or LinkSet(),
    )
    return ledger.append(entry, signer=signer)


def transition_voucher(ledger: Any, voucher_id: str, new_status: str, *,
                       links: LinkSet | None = None, expiry: str | None = None,
                       created_at: str | None = None,
                       signer: Any = None) -> EntryEnvelope:
    """Append the next revision of a voucher lineage with a new status.

    `voucher_id` may be the issuance id or any revision id; the revision
    counter continues from the latest one. Illegal lifecycle moves raise
    IllegalTransition.
    """
    base, _ = lineage_base(voucher_id)
    lineage = _voucher_lineages(entries_of(ledger)).get(base)
    if not lineage:
        raise IllegalTransition(f"no voucher lineage {base!r} in ledger")
    latest = lineage[-1]
    current = latest.payload.status
    if new_status not in VOUCHER_TRANSITIONS.get(current, frozenset()):
        raise IllegalTransition(f"voucher {base}: {current} -> {new_status} is not legal")
    next_rev = max(lineage_base(e.id)[1] for e in lineage) + 1
    payload = copy.deepcopy(latest.payload)
    payload.status = new_status
    if expiry is not None:
        payload.expiry = expiry
    entry = EntryEnvelope(
        id=f"{base}:rev{next_rev}",
        entry_type=EntryType.VOUCHER,
        created_at=created_at or _now(),
        actor=payload.steward,
        payload=payload,
        links=links or LinkSet(),
    )
    return ledger.append(entry, signer=signer)


# ---------------------------------------------------------------------------
# gate checks

@dataclass
class GateReason:
    voucher_id: str | None
    reason_kind: str

    def to_doc(self) -> dict:
        return {"voucherId": self.voucher_id, "reasonKind": self.reason_kind}


@dataclass
class GateDecision:
    allowed: bool
    reasons: list[GateReason] = field(default_factory=list)
    evaluated_at: str = ""
    expired_vouchers: list[str] = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "allowed": self.allowed,
            "reasons": [r.to_doc() for r in self.reasons],
            "evaluatedAt": self.evaluated_at,
            "expiredVouchers": list(self.expired_vouchers),
        }

    def describe(self) -> str:
        verdict = "allowed" if self.allowed else "denied"
        why = ", ".join(
            f"{r.reason_kind}({r.voucher_id})" if r.voucher_id else r.reason_kind
            for r in self.reasons)
        return f"{verdict}: {why}" if why else verdict


def _latest_run_decision(entries: list[EntryEnvelope], hidden: set[str],
                         test_id: str, artifact_id: str, version: str) -> str | None:
    decision = None
    for entry in entries:
        if (entry.entry_type is EntryType.EVALUATION_RUN and entry.id not in hidden
                and entry.payload.test_id == test_id
                and entry.payload.artifact_id == artifact_id
                and entry.payload.version == version):
            decision = entry.payload.decision
    return decision


def gate_check(source: Any, capability: str, artifact_id: str, version: str,
               boundary: str, now: str) -> GateDecision:
    """Decide whether a capability may activate inside a boundary.

    Only vouchers whose latest revision is active apply. An active pause
    voucher on the (capability, boundary) pair denies outright; an active
    condition voucher demands that each required test's latest run on the
    gated (or pinned) version passed, with fail/missing reported as
    conditionUnmet and inconclusive as inconclusiveTest. Vouchers past their
    expiry are skipped and reported separately. When nothing applies the gate
    allows by default and says so.
    """
    entries = entries_of(source)
    hidden = redacted_targets(entries)
    decision = GateDecision(allowed=True, evaluated_at=now)
    now_dt = parse_timestamp(now)
    applicable = 0
    for lineage in _voucher_lineages(entries).values():
        latest = lineage[-1]
        p = latest.payload
        if p.status != "active" or p.capability != capability or p.boundary != boundary:
            continue
        if p.expiry is not None and now_dt > parse_timestamp(p.expiry):
            decision.expired_vouchers.append(latest.id)
            continue
        applicable += 1
        if p.action == "pause":
            decision.allowed = False
            decision.reasons.append(GateReason(latest.id, "pausedByVoucher"))
        elif p.action == "condition":
            for condition in p.conditions:
                pinned = condition.must_pass_on_version or version
                run = _latest_run_decision(entries, hidden, condition.required_test_id,
                                           artifact_id, pinned)
                if run == "pass":
                    continue
                decision.allowed = False
                kind = "inconclusiveTest" if run == "inconclusive" else "conditionUnmet"
                decision.reasons.append(GateReason(latest.id, kind))
        # action=authorize applies without blocking
    if applicable == 0:
        decision.reasons.append(GateReason(None, DEFAULT_ALLOW))
    return decision


# ---------------------------------------------------------------------------
# credit policy

@dataclass
class CreditPolicy:
    units_per_event: dict[str, int | float] = field(default_factory=dict)
    cap_per_beneficiary_per_period: int | float = 0
    period_days: int = 365
    quality_gate: bool = True
    persistence_gate_releases: int = 0
    extensions: dict = field(default_factory=dict)

    _KEYS = ("unitsPerEvent", "capPerBeneficiaryPerPeriod", "periodDays",
             "qualityGate", "persistenceGateReleases")

    @classmethod
    def from_doc(cls, doc: Any) -> "CreditPolicy":
        if not isinstance(doc, dict):
            raise InvalidPolicy("policy must be a document")
        units = doc.get("unitsPerEvent", {})
        if not isinstance(units, dict):
            raise InvalidPolicy("unitsPerEvent must be a map")
        policy = cls(
            units_per_event=dict(units),
            cap_per_beneficiary_per_period=doc.get("capPerBeneficiaryPerPeriod", 0),
            period_days=doc.get("periodDays", 365),
            quality_gate=doc.get("qualityGate", True),
            persistence_gate_releases=doc.get("persistenceGateReleases", 0),
            extensions={k: v for k, v in doc.items() if k not in cls._KEYS},
        )
        policy.validate()
        return policy

    def to_doc(self) -> dict:
        doc = {
            "unitsPerEvent": dict(self.units_per_event),
            "capPerBeneficiaryPerPeriod": self.cap_per_beneficiary_per_period,
            "periodDays": self.period_days,
            "qualityGate": self.quality_gate,
            "persistenceGateReleases": self.persistence_gate_releases,
        }
        doc.update(self.extensions)
        return doc

    def validate(self) -> None:
        def _units(value: Any) -> bool:
            return (isinstance(value, (int, float)) and not isinstance(value, bool)
                    and math.isfinite(value) and value >= 0)

        for kind, units in self.units_per_event.items():
            if kind not in CREDIT_EVENT_KINDS:
                raise InvalidPolicy(f"unknown event kind {kind!r} in unitsPerEvent")
            if not _units(units):
                raise InvalidPolicy(f"units for {kind} must be a nonnegative number")
        if not _units(self.cap_per_beneficiary_per_period):
            raise InvalidPolicy("capPerBeneficiaryPerPeriod must be a nonnegative number")
        if self.units_per_event and self.cap_per_beneficiary_per_period < max(
                self.units_per_event.values()):
            raise InvalidPolicy("cap must cover the largest single event unit")
        if not isinstance(self.period_days, int) or isinstance(self.period_days, bool) \
                or self.period_days < 1:
            raise InvalidPolicy("periodDays must be a positive integer")
        if not isinstance(self.quality_gate, bool):
            raise InvalidPolicy("qualityGate must be a boolean")
        if not isinstance(self.persistence_gate_releases, int) \
                or isinstance(self.persistence_gate_releases, bool) \
                or self.persistence_gate_releases < 0:
            raise InvalidPolicy("persistenceGateReleases must be a nonnegative integer")

    def ref(self) -> str:
        return compute_hash(canonical_json(self.to_doc()).encode("utf-8"))

    def units_for(self, kind: str) -> Decimal:
        return Decimal(str(self.units_per_event.get(kind, 0)))

    @property
    def cap(self) -> Decimal:
        return Decimal(str(self.cap_per_beneficiary_per_period))


# ---------------------------------------------------------------------------
# credit accrual

@dataclass
class _Event:
    kind: str
    anchor_index: int
    anchor_id: str
    anchor_created_at: str
    test_id: str | None
    beneficiaries: list[str]
    run_key: tuple[str, str, str] | None  # (artifactId, version, checkpoint)


@dataclass
class SuppressedEvent:
    kind: str
    trigger_id: str
    reason: str
    beneficiary: str | None = None

    def to_doc(self) -> dict:
        doc = {"eventKind": self.kind, "triggerId": self.trigger_id,
               "reason": self.reason}
        if self.beneficiary is not None:
            doc["beneficiary"] = self.beneficiary
        return doc


@dataclass
class AccrualReport:
    window: tuple[str, str]
    policy_ref: str
    considered: int = 0
    credits: list[EntryEnvelope] = field(default_factory=list)
    suppressed: list[SuppressedEvent] = field(default_factory=list)

    def total_units(self) -> Decimal:
        return sum((Decimal(str(c.payload.units)) for c in self.credits), Decimal(0))

    def to_doc(self) -> dict:
        return {
            "window": {"start": self.window[0], "end": self.window[1]},
            "policyRef": self.policy_ref,
            "consideredEvents": self.considered,
            "creditIds": [c.id for c in self.credits],
            "totalUnits": float(self.total_units()),
            "suppressed": [s.to_doc() for s in self.suppressed],
        }


def _beneficiaries_of(entries: list[EntryEnvelope], hidden: set[str],
                      contribution_ids: list[str]) -> list[str]:
    """Distinct steward orgs or pseudonyms behind a contribution list,
    first-seen order."""
    by_id = {e.id: e for e in entries}
    names: list[str] = []
    for cid in contribution_ids:
        entry = by_id.get(cid)
        if (entry is None or entry.entry_type is not EntryType.CONTRIBUTION
                or entry.id in hidden):
            continue
        name = entry.actor.display_name()
        if name and name not in names:
            names.append(name)
    return names


def _suite_flip(entries: list[EntryEnvelope], hidden: set[str], test_id: str,
                run_key: tuple[str, str, str]) -> bool:
    """True when removing the test's runs from its suite changes the suite
    verdict. The suite is every run sharing (artifactId, version, checkpoint)."""
    with_test: list[str] = []
    without: list[str] = []
    for entry in entries:
        if entry.entry_type is not EntryType.EVALUATION_RUN or entry.id in hidden:
            continue
        p = entry.payload
        if (p.artifact_id, p.version, p.checkpoint) != run_key:
            continue
        with_test.append(p.decision)
        if p.test_id != test_id:
            without.append(p.decision)
    return fold_suite(with_test) != fold_suite(without)


def _releases_exercised(entries: list[EntryEnvelope], hidden: set[str],
                        test_id: str) -> int:
    versions = {(e.payload.artifact_id, e.payload.version)
                for e in entries
                if e.entry_type is EntryType.EVALUATION_RUN and e.id not in hidden
                and e.payload.test_id == test_id}
    return len(versions)


def _candidate_events(entries: list[EntryEnvelope], hidden: set[str],
                      window: tuple[str, str]) -> list[_Event]:
    index_of = {e.id: i for i, e in enumerate(entries)}
    by_id = {e.id: e for e in entries}
    tests = {e.id: e for e in entries
             if e.entry_type is EntryType.TEST and e.id not in hidden}
    events: list[_Event] = []

    for regression in detect_regressions(entries):
        failing = by_id[regression.failing_run_id]
        if not _in_window(failing.created_at, window):
            continue
        test = tests.get(regression.test_id)
        motivated = test.payload.motivated_by if test else []
        events.append(_Event(
            kind="regressionDetected",
            anchor_index=index_of[failing.id],
            anchor_id=failing.id,
            anchor_created_at=failing.created_at,
            test_id=regression.test_id,
            beneficiaries=_beneficiaries_of(entries, hidden, motivated),
            run_key=(failing.payload.artifact_id, failing.payload.version,
                     failing.payload.checkpoint),
        ))

    for i, entry in enumerate(entries):
        if entry.id in hidden or not _in_window(entry.created_at, window):
            continue
        if entry.entry_type is EntryType.CHANGE and entry.links.remediates:
            incidents = [
                cid for cid in entry.links.influenced_by
                if cid in by_id and cid not in hidden
                and by_id[cid].entry_type is EntryType.CONTRIBUTION
                and by_id[cid].payload.kind == "incidentReport"]
            if incidents:
                events.append(_Event(
                    kind="remediationCompleted",
                    anchor_index=i,
                    anchor_id=entry.id,
                    anchor_created_at=entry.created_at,
                    test_id=None,
                    beneficiaries=_beneficiaries_of(entries, hidden, incidents),
                    run_key=None,
                ))
        elif (entry.entry_type is EntryType.EVALUATION_RUN
              and entry.payload.checkpoint == "scheduledAudit"):
            test = tests.get(entry.payload.test_id)
            if test is not None and test.payload.motivated_by:
                events.append(_Event(
                    kind="scheduledRunDependency",
                    anchor_index=i,
                    anchor_id=entry.id,
                    anchor_created_at=entry.created_at,
                    test_id=test.id,
                    beneficiaries=_beneficiaries_of(
                        entries, hidden, test.payload.motivated_by),
                    run_key=(entry.payload.artifact_id, entry.payload.version,
                             entry.payload.checkpoint),
                ))

    events.sort(key=lambda e: (e.anchor_index, e.kind))
    return events


def _credit_id(kind: str, anchor_id: str, beneficiary: str) -> str:
    return f"pl:credit:{kind.lower()}:{_slug(anchor_id)}:{_slug(beneficiary)}"


def compute_accrual(entries: list[EntryEnvelope], policy: CreditPolicy,
                    window: tuple[str, str]) -> tuple[list[dict], AccrualReport]:
    """Pure accrual core: decide which credits a window earns.

    Returns (credit payload plans, report). Plans carry everything needed to
    mint entries: id, beneficiary, kind, anchor id, units, createdAt. The
    report's credits list is filled by the caller that actually appends.
    """
    policy.validate()
    hidden = redacted_targets(entries)
    policy_ref = policy.ref()
    report = AccrualReport(window=window, policy_ref=policy_ref)
    events = _candidate_events(entries, hidden, window)
    report.considered = len(events)

    already: set[tuple[str, str]] = set()
    credited: dict[str, Decimal] = {}
    for entry in entries:
        if entry.entry_type is EntryType.CREDIT and entry.id not in hidden:
            for target in entry.links.credits_for:
                already.add((target, entry.payload.beneficiary))
            if _in_window(entry.created_at, window):
                beneficiary = entry.payload.beneficiary
                credited[beneficiary] = credited.get(beneficiary, Decimal(0)) \
                    + Decimal(str(entry.payload.units))

    plans: list[dict] = []
    planned_ids: set[str] = set()
    for event in events:
        units = policy.units_for(event.kind)
        if units == 0:
            report.suppressed.append(SuppressedEvent(event.kind, event.anchor_id,
                                                     "zeroUnits"))
            continue
        if not event.beneficiaries:
            report.suppressed.append(SuppressedEvent(event.kind, event.anchor_id,
                                                     "noBeneficiary"))
            continue
        if policy.quality_gate and event.test_id is not None and event.run_key is not None:
            if not _suite_flip(entries, hidden, event.test_id, event.run_key):
                report.suppressed.append(SuppressedEvent(event.kind, event.anchor_id,
                                                         "qualityGate"))
                continue
        if policy.persistence_gate_releases > 0 and event.test_id is not None:
            exercised = _releases_exercised(entries, hidden, event.test_id)
            if exercised < policy.persistence_gate_releases:
                report.suppressed.append(SuppressedEvent(event.kind, event.anchor_id,
                                                         "persistenceGate"))
                continue
        share = (units / len(event.beneficiaries)).quantize(
            Decimal("0.01"), rounding=ROUND_HALF_EVEN)
        if share == 0:
            report.suppressed.append(SuppressedEvent(event.kind, event.anchor_id,
                                                     "zeroUnits"))
            continue
        for beneficiary in event.beneficiaries:
            if (event.anchor_id, beneficiary) in already:
                report.suppressed.append(SuppressedEvent(
                    event.kind, event.anchor_id, "alreadyCredited", beneficiary))
                continue
            total = credited.get(beneficiary, Decimal(0))
            if total + share > policy.cap:
                report.suppressed.append(SuppressedEvent(
                    event.kind, event.anchor_id, "capReached", beneficiary))
                continue
            credit_id = _credit_id(event.kind, event.anchor_id, beneficiary)
            if credit_id in planned_ids:
                report.suppressed.append(SuppressedEvent(
                    event.kind, event.anchor_id, "alreadyCredited", beneficiary))
                continue
            credited[beneficiary] = total + share
            planned_ids.add(credit_id)
            plans.append({
                "id": credit_id,
                "kind": event.kind,
                "anchorId": event.anchor_id,
                "beneficiary": beneficiary,
                "units": share,
                "policyRef": policy_ref,
            })
    return plans, report


def accrue_credits(ledger: Any, policy: CreditPolicy | dict,
                   window: tuple[str, str], *, actor: ActorRef | None = None,
                   created_at: str | None = None,
                   signer: Any = None) -> tuple[list[EntryEnvelope], AccrualReport]:
    """Append one Credit entry per qualifying event share in the window.

    Credits are stamped at the window end by default so reruns are
    deterministic; idempotence comes from creditsFor links, so accruing the
    same window twice appends nothing new.
    """
    if not isinstance(policy, CreditPolicy):
        policy = CreditPolicy.from_doc(policy)
    entries = entries_of(ledger)
    plans, report = compute_accrual(entries, policy, window)
    recorder = actor or ActorRef(role="maintainer", pseudonym="credit-accrual")
    stamp = created_at or window[1]
    minted: list[EntryEnvelope] = []
    for plan in plans:
        trigger_kwargs = (
            {"change_id": plan["anchorId"]} if plan["kind"] == "remediationCompleted"
            else {"evaluation_run_id": plan["anchorId"]})
        payload = CreditPayload(
            beneficiary=plan["beneficiary"],
            triggering_event=TriggeringEvent(kind=plan["kind"], **trigger_kwargs),
            units=float(plan["units"]),
            policy_ref=plan["policyRef"],
        )
        entry = EntryEnvelope(
            id=plan["id"],
            entry_type=EntryType.CREDIT,
            created_at=stamp,
            actor=recorder,
            payload=payload,
            links=LinkSet(credits_for=[plan["anchorId"]]),
        )
        minted.append(ledger.append(entry, signer=signer))
    report.credits = minted
    return minted, report


# ---------------------------------------------------------------------------
# credit statements

@dataclass
class CreditStatement:
    beneficiary: str
    window: tuple[str, str]
    lines: list[dict] = field(default_factory=list)
    total_units: Decimal = Decimal(0)
    policy_refs: list[str] = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "beneficiary": self.beneficiary,
            "window": {"start": self.window[0], "end": self.window[1]},
            "events": list(self.lines),
            "totalUnits": float(self.total_units),
            "policyRefs": list(self.policy_refs),
        }


def credit_report(source: Any, beneficiary: str,
                  window: tuple[str, str]) -> CreditStatement:
    """Aggregate a beneficiary's Credit entries inside a window. Every line
    cites the triggering run or change id."""
    entries = entries_of(source)
    hidden = redacted_targets(entries)
    statement = CreditStatement(beneficiary=beneficiary, window=window)
    for entry in entries:
        if (entry.entry_type is not EntryType.CREDIT or entry.id in hidden
                or entry.payload.beneficiary != beneficiary
                or not _in_window(entry.created_at, window)):
            continue
        trigger = entry.payload.triggering_event
        statement.lines.append({
            "creditId": entry.id,
            "eventKind": trigger.kind,
            "triggerId": trigger.trigger_id(),
            "units": entry.payload.units,
            "policyRef": entry.payload.policy_ref,
        })
        statement.total_units += Decimal(str(entry.payload.units))
        if entry.payload.policy_ref not in statement.policy_refs:
            statement.policy_refs.append(entry.payload.policy_ref)
    return statement
