"""Zero-trust identity and access management for autonomous agents.

Subsystems: decentralized identities (`identity`), verifiable credentials
with selective disclosure (`credentials`), capability-aware agent naming
(`ans`), attribute-based access control (`policy`), cross-protocol session
control (`sessions`), a tamper-evident audit log (`audit`), and a
deterministic multi-agent simulation harness (`harness`).
"""

__version__ = "0.1.0"
