"""Shared example data: a canonical sample entry and a full lifecycle ledger.

The sample contribution is the package's reference document: it parses, it
validates clean, and its canonical bytes and sealed digest are frozen in the
test suite as regression anchors.

build_lifecycle writes a complete governance story to disk: a workshop
contribution motivates a test, an image generator passes at v1 and is
deployed, v2 regresses on a scheduled audit, a steward pauses the capability,
a remediation change ships v3, the test passes again, the voucher is
satisfied, and credit accrues to the contributors' steward.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any

from .governance import CreditPolicy, accrue_credits, issue_voucher, transition_voucher
from .harness import run_test
from .model import (
    ActorRef,
    ArtifactPayload,
    ChangedArtifact,
    ChangePayload,
    CompensationBlock,
    ConsentBlock,
    ContributionPayload,
    EntryEnvelope,
    EntryType,
    LinkSet,
    MeasurementProcedure,
    TestPayload,
    VoucherPayload,
    parse_entry,
)
from .store import LedgerFile

SAMPLE_SUMMARY = "Accessible waterfront park with ramps and diverse seating."
SAMPLE_ARTIFACT_REF = (
    "artifact:prompt:sha256:" + hashlib.sha256(SAMPLE_SUMMARY.encode("utf-8")).hexdigest()
)


def sample_contribution_doc() -> dict:
    """The reference contribution document, unsealed."""
    return {
        "id": "pl:contrib:wedesign:prompt:001",
        "type": "Contribution",
        "createdAt": "2025-05-10T14:30:00Z",
        "actor": {"role": "resident", "pseudonym": "P12"},
        "consent": {"status": "granted", "scope": "research+design", "retention": "3y"},
        "compensation": {"model": "honorarium", "amount": 50, "currency": "CAD"},
        "contribution": {
            "kind": "prompt",
            "summary": SAMPLE_SUMMARY,
            "artifactRef": SAMPLE_ARTIFACT_REF,
        },
        "links": {
            "influences": ["pl:test:accessibility:001"],
            "evidence": ["pl:evidence:workshoplog:001"],
        },
    }


def sample_contribution() -> EntryEnvelope:
    return parse_entry(sample_contribution_doc())


# Lifecycle fixture constants. Tests and the command-line walkthrough share
# these so expectations stay in one place.
ARTIFACT_ID = "pl:artifact:consult:imagegen"
DEPLOYMENT_ID = "pl:artifact:consult:deployment"
CAPABILITY = "image-generation"
BOUNDARY = "consultation_workflow"
CONTRIBUTION_ID = "pl:contrib:wedesign:prompt:001"
TEST_ID = "pl:test:accessibility:001"
VOUCHER_ID = "pl:voucher:consult:imagegen-pause:001"
STEWARD_ORG = "pl:org:wedesign-steward"
WINDOW = ("2025-05-01T00:00:00Z", "2025-06-30T00:00:00Z")
POLICY_DOC = {
    "unitsPerEvent": {
        "regressionDetected": 10,
        "remediationCompleted": 0,
        "scheduledRunDependency": 0,
    },
    "capPerBeneficiaryPerPeriod": 100,
    "periodDays": 365,
    "qualityGate": True,
    "persistenceGateReleases": 0,
}

# Entry count once the pause voucher is active but remediation has not
# shipped: contribution, change, test, artifact v1, passing run, deployment,
# artifact v2, failing run, voucher, activation.
STAGE_PAUSED = 10

# Table of published per-case evidence codings used by the audit walkthrough.
CASE_CODINGS: list[dict[str, Any]] = [
    {"case": "AIAI / Mid-Space / LIVS", "codings": {
        "recruitmentPathway": "Reported",
        "rolesAndIntermediaries": "Partial",
        "consentPrivacyScope": "Partial",
        "compensationTerms": "NotSpecified",
        "explicitInfluenceLinks": "Partial",
    }},
    {"case": "EVADIA+", "codings": {
        "recruitmentPathway": "Partial",
        "rolesAndIntermediaries": "Partial",
        "consentPrivacyScope": "Partial",
        "compensationTerms": "NotSpecified",
        "explicitInfluenceLinks": "NotSpecified",
    }},
    {"case": "AI-EDI-Space / Street Review", "codings": {
        "recruitmentPathway": "Reported",
        "rolesAndIntermediaries": "Partial",
        "consentPrivacyScope": "Partial",
        "compensationTerms": "NotSpecified",
        "explicitInfluenceLinks": "Partial",
    }},
    {"case": "WeDesign+", "codings": {
        "recruitmentPathway": "Reported",
        "rolesAndIntermediaries": "Partial",
        "consentPrivacyScope": "Partial",
        "compensationTerms": "Reported",
        "explicitInfluenceLinks": "Partial",
    }},
]


def _content_ref(label: str) -> str:
    return "artifact:model:sha256:" + hashlib.sha256(label.encode("utf-8")).hexdigest()


def build_lifecycle(path: str | Path, stop_after: int | None = None) -> dict[str, str]:
    """Write the lifecycle ledger to `path` and return the ids by stage name.

    `stop_after` caps the entry count (STAGE_PAUSED stops right after the
    pause voucher goes active, mid-remediation).
    """
    ids: dict[str, str] = {}
    steps: list[Any] = []

    contribution = EntryEnvelope(
        id=CONTRIBUTION_ID,
        entry_type=EntryType.CONTRIBUTION,
        created_at="2025-05-10T14:30:00Z",
        actor=ActorRef(role="resident", pseudonym="P12", steward_org=STEWARD_ORG),
        payload=ContributionPayload(
            kind="prompt",
            summary=SAMPLE_SUMMARY,
            artifact_ref=SAMPLE_ARTIFACT_REF,
            intended_use="evaluation-only",
        ),
        consent=ConsentBlock(status="granted", scope="research+design", retention="3y"),
        compensation=CompensationBlock(model="honorarium", amount=50, currency="CAD"),
        links=LinkSet(influences=[TEST_ID], evidence=["pl:evidence:workshoplog:001"]),
    )
    steps.append(("contribution", contribution))

    change_initial = EntryEnvelope(
        id="pl:change:consult:accessibility:001",
        entry_type=EntryType.CHANGE,
        created_at="2025-05-12T09:00:00Z",
        actor=ActorRef(role="maintainer", pseudonym="M1"),
        payload=ChangePayload(
            change_kind="guardrail",
            rationale="Add accessibility guardrails suggested in the workshop.",
            changed_artifacts=[ChangedArtifact(artifact_id=ARTIFACT_ID, version_after="v1")],
        ),
        links=LinkSet(influenced_by=[CONTRIBUTION_ID], uses_test=[TEST_ID]),
    )
    steps.append(("change_initial", change_initial))

    test = EntryEnvelope(
        id=TEST_ID,
        entry_type=EntryType.TEST,
        created_at="2025-05-12T10:00:00Z",
        actor=ActorRef(role="evaluator", pseudonym="E1"),
        payload=TestPayload(
            topic="accessibility",
            expected_behavior="Generated park scenes keep ramps and step-free paths.",
            measurement=MeasurementProcedure(
                runner_kind="rubric",
                criteria=["ramps", "continuous-paths"],
                scale_max=5,
                aggregation="mean",
                pass_mean=4,
                min_raters=3,
            ),
            input_spec={"promptSet": "accessibility-v1"},
            motivated_by=[CONTRIBUTION_ID],
        ),
        links=LinkSet(motivates=[CONTRIBUTION_ID]),
    )
    steps.append(("test", test))

    def artifact_entry(version: str, created_at: str) -> EntryEnvelope:
        return EntryEnvelope(
            id=f"{ARTIFACT_ID}:{version}",
            entry_type=EntryType.ARTIFACT,
            created_at=created_at,
            actor=ActorRef(role="maintainer", pseudonym="M1"),
            payload=ArtifactPayload(
                artifact_id=ARTIFACT_ID,
                artifact_kind="model",
                version=version,
                content_ref=_content_ref(f"imagegen-{version}"),
            ),
            links=LinkSet(deployed_as=[DEPLOYMENT_ID]),
        )

    steps.append(("artifact_v1", artifact_entry("v1", "2025-05-15T08:00:00Z")))
    steps.append(("run_v1", ("run", {
        "version": "v1",
        "raw_results": {"scores": [[5, 4], [4, 4], [4, 5]]},
        "checkpoint": "preDeploymentGate",
        "created_at": "2025-05-15T09:30:00Z",
    })))

    deployment = EntryEnvelope(
        id=DEPLOYMENT_ID,
        entry_type=EntryType.ARTIFACT,
        created_at="2025-05-16T08:00:00Z",
        actor=ActorRef(role="deployer", pseudonym="D1"),
        payload=ArtifactPayload(
            artifact_id=DEPLOYMENT_ID,
            artifact_kind="extension:deployment",
            version="v1",
            content_ref="https://consult.example/deployments/2025-05-16",
            boundary=BOUNDARY,
        ),
    )
    steps.append(("deployment", deployment))

    steps.append(("artifact_v2", artifact_entry("v2", "2025-06-18T08:00:00Z")))
    steps.append(("run_v2", ("run", {
        "version": "v2",
        "raw_results": {"scores": [[3, 2], [2, 3], [3, 3]]},
        "checkpoint": "scheduledAudit",
        "created_at": "2025-06-20T10:00:00Z",
    })))
    steps.append(("voucher", ("issue", {})))
    steps.append(("voucher_active", ("transition", {
        "new_status": "active", "created_at": "2025-06-20T12:30:00Z",
    })))

    change_remediation = EntryEnvelope(
        id="pl:change:consult:remediation:001",
        entry_type=EntryType.CHANGE,
        created_at="2025-06-22T09:00:00Z",
        actor=ActorRef(role="maintainer", pseudonym="M1"),
        payload=ChangePayload(
            change_kind="promptLibrary",
            rationale="Rework prompt templates so accessibility cues persist.",
            changed_artifacts=[ChangedArtifact(
                artifact_id=ARTIFACT_ID, version_after="v3", version_before="v2")],
        ),
        links=LinkSet(influenced_by=[CONTRIBUTION_ID], uses_test=[TEST_ID],
                      remediates=["pl:run:accessibility:v2:001"]),
    )
    steps.append(("change_remediation", change_remediation))

    steps.append(("artifact_v3", artifact_entry("v3", "2025-06-25T08:00:00Z")))
    steps.append(("run_v3", ("run", {
        "version": "v3",
        "raw_results": {"scores": [[5, 4], [4, 5], [5, 5]]},
        "checkpoint": "postIncident",
        "created_at": "2025-06-26T09:00:00Z",
    })))
    steps.append(("voucher_satisfied", ("transition", {
        "new_status": "satisfied", "created_at": "2025-06-26T10:00:00Z",
        "evidence": ["pl:run:accessibility:v3:001"],
    })))
    steps.append(("credit", ("accrue", {})))

    evaluator = ActorRef(role="evaluator", pseudonym="E1")
    with LedgerFile(path) as ledger:
        for name, step in steps:
            if stop_after is not None and len(ledger) >= stop_after:
                break
            if isinstance(step, EntryEnvelope):
                ids[name] = ledger.append(step).id
            elif step[0] == "run":
                spec = step[1]
                run = run_test(
                    ledger, TEST_ID, ARTIFACT_ID, spec["version"],
                    spec["raw_results"], evaluator, spec["checkpoint"],
                    created_at=spec["created_at"],
                )
                ids[name] = run.id
            elif step[0] == "issue":
                voucher = issue_voucher(
                    ledger,
                    VoucherPayload(
                        capability=CAPABILITY,
                        boundary=BOUNDARY,
                        action="pause",
                        steward=ActorRef(role="communitySteward", steward_org=STEWARD_ORG),
                        status="issued",
                    ),
                    voucher_id=VOUCHER_ID,
                    links=LinkSet(evidence=[ids["run_v2"]]),
                    created_at="2025-06-20T12:00:00Z",
                )
                ids[name] = voucher.id
            elif step[0] == "transition":
                spec = step[1]
                links = LinkSet(evidence=spec["evidence"]) if "evidence" in spec else None
                moved = transition_voucher(
                    ledger, VOUCHER_ID, spec["new_status"],
                    links=links, created_at=spec["created_at"],
                )
                ids[name] = moved.id
            elif step[0] == "accrue":
                policy = CreditPolicy.from_doc(POLICY_DOC)
                minted, _report = accrue_credits(ledger, policy, WINDOW)
                for index, credit in enumerate(minted):
                    key = "credit" if index == 0 else f"credit_{index}"
                    ids[key] = credit.id
    return ids
