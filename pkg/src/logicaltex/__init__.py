"""logicaltex: rewrite visually formatted LaTeX into logical LaTeX, verifiably.

The pipeline is deterministic end to end: a lossless lexer, context-aware
detection with fixed confidence scoring, span-based rewriting that cannot
touch bytes outside its plan, a seeded degrader that synthesizes visual
documents with ground-truth sidecars, and validators that score round
trips instead of trusting them.
"""

from .arxiv import ArxivClient, ArxivRecord
from .converter import (
    ConversionPolicy,
    ConversionReport,
    Edit,
    OverlapError,
    PolicyViolation,
    RewritePlan,
    Scope,
    apply,
    convert,
    plan,
)
from .degrader import DegradationProfile, GroundTruth, NotLogicalError, degrade, emit_pairs
from .detector import (
    Cue,
    CueKind,
    Detection,
    DetectionKind,
    DocumentClass,
    FormattingClass,
    classify,
    detect_abstract,
    detect_all,
    detect_authors_affiliations,
    detect_emphasis_and_theorems,
    detect_section_headers,
    detect_title,
    extract_frontmatter,
    frontmatter_region,
)
from .lexer import (
    BlockTree,
    Diagnostic,
    Span,
    Token,
    TokenKind,
    TokenStream,
    build_tree,
    math_spans,
    parse,
    protected_spans,
    tokenize,
)
from .model import (
    Affiliation,
    Author,
    FrontMatter,
    Marker,
    MarkerSymbol,
    StyledText,
    extract_markers,
    normalize_marker,
    resolve_affiliations,
    strip_styling,
)
from .validator import (
    ExtractedMetadata,
    MetadataScores,
    ValidationReport,
    Verdict,
    check_body_preservation,
    compare_metadata,
    validate,
    validate_structure,
)

__version__ = "0.1.0"
