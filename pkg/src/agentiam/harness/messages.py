"""Wire shapes for the two simulated protocols.

Agent-to-agent messages carry identity material in an extension block:
a message signature over header plus payload, optional credential
presentations, and an optional second signature over the payload alone
(made with a dedicated key, e.g. a transaction key).  Tool calls carry
exactly two metadata entries: the caller DID and the serialized
authorization credential.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

from ..canonical import canonical_bytes
from ..credentials import Presentation, Proof, VerifiableCredential
from ..crypto import KeyPair
from ..errors import InvalidInputError

__all__ = [
    "A2A_PROTOCOL_VERSION",
    "MCP_METADATA_KEYS",
    "A2AMessage",
    "McpCall",
    "build_a2a_message",
    "build_mcp_call",
]

A2A_PROTOCOL_VERSION = "A2A/1.0"

# The complete metadata surface of a tool call; nothing else rides along.
MCP_METADATA_KEYS = ("x-agent-did", "authorization-vc")


@dataclass(frozen=True)
class A2AMessage:
    message_id: str
    sender_did: str
    recipient_did: str
    tick: int
    payload: Mapping[str, Any]
    message_signature: Proof
    presentations: tuple[Presentation, ...] = ()
    payload_signature: Optional[Proof] = None
    protocol_version: str = A2A_PROTOCOL_VERSION

    def header(self) -> dict[str, Any]:
        return {
            "messageId": self.message_id,
            "senderId": self.sender_did,
            "recipientId": self.recipient_did,
            "protocolVersion": self.protocol_version,
            "tick": self.tick,
        }

    def signed_body(self) -> dict[str, Any]:
        """What the message signature covers: header and payload, nothing else."""
        return {"a2aHeader": self.header(), "payload": dict(self.payload)}

    def to_value(self) -> dict[str, Any]:
        value: dict[str, Any] = {
            "a2aHeader": self.header(),
            "iamExtension": {
                "verifiablePresentation": [p.to_value() for p in self.presentations],
                "messageSignature": self.message_signature.to_value(),
            },
            "payload": dict(self.payload),
        }
        if self.payload_signature is not None:
            value["payloadSignature"] = self.payload_signature.to_value()
        return value

    def canonical(self) -> bytes:
        return canonical_bytes(self.to_value())

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "A2AMessage":
        header = value["a2aHeader"]
        extension = value["iamExtension"]
        payload_sig = value.get("payloadSignature")
        return cls(
            message_id=header["messageId"],
            sender_did=header["senderId"],
            recipient_did=header["recipientId"],
            tick=header["tick"],
            payload=dict(value["payload"]),
            message_signature=Proof.from_value(extension["messageSignature"]),
            presentations=tuple(
                Presentation.from_value(p) for p in extension["verifiablePresentation"]
            ),
            payload_signature=Proof.from_value(payload_sig) if payload_sig else None,
            protocol_version=header["protocolVersion"],
        )


def build_a2a_message(
    message_key: KeyPair,
    *,
    message_id: str,
    sender_did: str,
    recipient_did: str,
    tick: int,
    payload: Mapping[str, Any],
    presentations: tuple[Presentation, ...] = (),
    payload_key: Optional[KeyPair] = None,
    protocol_version: str = A2A_PROTOCOL_VERSION,
) -> A2AMessage:
    """Assemble and sign a message.

    ``payload_key`` adds the second signature over the payload alone so a
    recipient can verify business content independently of transport.
    """
    if not message_id:
        raise InvalidInputError("messages need a non-empty messageId")
    payload = dict(payload)
    payload_signature = None
    if payload_key is not None:
        payload_signature = Proof(
            key_id=payload_key.key_id,
            signature=payload_key.sign(canonical_bytes(payload)),
        )
    header = {
        "messageId": message_id,
        "senderId": sender_did,
        "recipientId": recipient_did,
        "protocolVersion": protocol_version,
        "tick": tick,
    }
    body = {"a2aHeader": header, "payload": payload}
    message_signature = Proof(
        key_id=message_key.key_id,
        signature=message_key.sign(canonical_bytes(body)),
    )
    return A2AMessage(
        message_id=message_id,
        sender_did=sender_did,
        recipient_did=recipient_did,
        tick=tick,
        payload=payload,
        message_signature=message_signature,
        presentations=presentations,
        payload_signature=payload_signature,
        protocol_version=protocol_version,
    )


@dataclass(frozen=True)
class McpCall:
    """One tool invocation addressed to a specific tool instance."""

    agent_did: str
    credential_wire: str
    tool_did: str
    action: str
    job_id: str
    input_ref: str
    parameters: Mapping[str, str] = field(default_factory=dict)

    def metadata(self) -> dict[str, str]:
        return {
            "x-agent-did": self.agent_did,
            "authorization-vc": self.credential_wire,
        }

    def request(self) -> dict[str, Any]:
        return {
            "jobId": self.job_id,
            "inputDataReference": self.input_ref,
            "parameters": dict(self.parameters),
        }

    def to_value(self) -> dict[str, Any]:
        return {
            "toolDid": self.tool_did,
            "action": self.action,
            "metadata": self.metadata(),
            "request": self.request(),
        }

    def canonical(self) -> bytes:
        return canonical_bytes(self.to_value())

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "McpCall":
        metadata = value["metadata"]
        if tuple(sorted(metadata)) != tuple(sorted(MCP_METADATA_KEYS)):
            raise InvalidInputError(
                f"tool-call metadata must carry exactly {MCP_METADATA_KEYS}"
            )
        request = value["request"]
        return cls(
            agent_did=metadata["x-agent-did"],
            credential_wire=metadata["authorization-vc"],
            tool_did=value["toolDid"],
            action=value["action"],
            job_id=request["jobId"],
            input_ref=request["inputDataReference"],
            parameters=dict(request["parameters"]),
        )


def build_mcp_call(
    agent_did: str,
    credential: VerifiableCredential,
    *,
    tool_did: str,
    job_id: str,
    input_ref: str,
    action: str = "executeTransform",
    parameters: Optional[Mapping[str, str]] = None,
) -> McpCall:
    parameters = dict(parameters or {})
    for key, value in parameters.items():
        if not isinstance(value, str):
            raise InvalidInputError(f"parameter {key!r} must be a string")
    wire = canonical_bytes(credential.to_value()).decode("utf-8")
    return McpCall(
        agent_did=agent_did,
        credential_wire=wire,
        tool_did=tool_did,
        action=action,
        job_id=job_id,
        input_ref=input_ref,
        parameters=parameters,
    )
