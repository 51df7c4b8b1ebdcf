"""Exception hierarchy for the conversion pipeline.

Every failure the pipeline can report deliberately derives from AloudError so
the CLI can turn any of them into a single machine-parsable error line.
"""


class AloudError(Exception):
    """Base class for all pipeline errors."""


# -- container / package document ------------------------------------------

class NotZip(AloudError):
    """Input file is not a zip archive."""


class MissingMimetype(AloudError):
    """No ``mimetype`` entry, or its bytes are not ``application/epub+zip``."""


class MissingContainerXml(AloudError):
    """``META-INF/container.xml`` is absent."""


class MalformedOpf(AloudError):
    """The package document cannot be parsed or is internally inconsistent."""


class DanglingSpineRef(AloudError):
    """A spine ``idref`` does not resolve to a manifest item."""


class IoFailure(AloudError):
    """Filesystem write failed."""


# -- XHTML handling --------------------------------------------------------

class MalformedXhtml(AloudError):
    """Chapter markup is not well-formed XML."""


# -- synthesis -------------------------------------------------------------

class Overflow(AloudError):
    """The engine rejected a fragment because it exceeds its context window."""


class EngineFailure(AloudError):
    """Non-overflow engine error (crash, protocol violation, bad output)."""


class UnsplittableOverflow(AloudError):
    """Overflow persisted on a fragment that cannot be split further."""


# -- stitching -------------------------------------------------------------

class RateMismatch(AloudError):
    """Unit waveforms do not share the expected sample rate."""


class EncoderFailure(AloudError):
    """External audio encoder exited nonzero or produced no output."""


# -- overlay building ------------------------------------------------------

class EmptyChapter(AloudError):
    """Interval computation received zero units."""


class MissingChapterItem(AloudError):
    """A narrated chapter has no matching manifest item."""


# -- drift evaluation ------------------------------------------------------

class NoOverlays(AloudError):
    """The publication carries no Media Overlays."""


class BrokenTextRef(AloudError):
    """A SMIL par references a text anchor that does not exist."""


class EmptyInput(AloudError):
    """Statistics requested over an empty sample set."""
