"""Exception types shared across the package."""


class PrivstoreError(Exception):
    """Base class for all errors raised by this package."""


class IntegrityFailure(PrivstoreError):
    """Authenticated decryption or MAC verification failed.

    Wrong keys, tampered ciphertext, and malformed wire data are
    deliberately indistinguishable through this error.
    """


class PathUnknown(PrivstoreError):
    """A node number does not exist in the index tree."""


class NodeDeleted(PrivstoreError):
    """Operation targets a node flagged as deleted."""


class UnknownLeaf(PrivstoreError):
    """An authorized path is not a live file leaf of the tree."""


class MissingUpdateKey(PrivstoreError):
    """A node is flagged re-keyed but has no entry in the update tree."""


class ParentNotFolder(PrivstoreError):
    """Child allocation requested under a non-folder node."""


class EmptyListing(PrivstoreError):
    """Index construction was given an empty listing."""


class UnknownUser(PrivstoreError):
    """The owner has no access-control entry for this user."""


class EmptyGrant(PrivstoreError):
    """No file qualifies for the requested authorization."""


class NoCoveringKey(PrivstoreError):
    """No granted key pair covers the returned blob's number."""


class ScopeViolation(PrivstoreError):
    """Requested numbers fall outside the certificate's number group."""


class InconsistentState(PrivstoreError):
    """Provider-side state contradiction (e.g. certificate from the future)."""


class UnknownKind(PrivstoreError):
    """Message kind tag is outside the closed enumeration."""


class ConfigInvalid(PrivstoreError):
    """Scenario configuration failed validation."""
