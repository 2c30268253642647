"""Attribute-grammar guided method-body generation for a Java subset."""

from .attrs import (
    DEFAULT_NAMESPACES,
    Namespaces,
    SemState,
    SymTab,
    VarId,
)
from .astio import AstNode, parse_ast, pretty_print, serialize_ast
from .checks import CheckReport, aggregate_reports, run_checks
from .corpus import (
    ClassRecord,
    SynthSpec,
    TrainingExample,
    drop_evidence,
    extract_examples,
    forced_replay,
    load_corpus,
    save_corpus,
    split_corpus,
    synth_corpus,
)
from .evidence import (
    EncoderParams,
    EvidenceSet,
    LatentPosterior,
    encode_evidence,
    posterior,
    posterior_of,
)
from .features import ContextFeatures, Vocabulary, encode_context
from .fidelity import (
    FidelityReport,
    api_call_sequences,
    api_call_set,
    fidelity_report,
    program_paths,
)
from .generator import GenConfig, GenerationAborted, apply_mask, beam_search, generate, greedy
from .grammar import GrammarSpec, check_l_attributed, java_subset_grammar
from .models import (
    CountModel,
    LatentHyper,
    LatentModel,
    next_token_eval,
    train_count,
    train_latent,
)
from .registry import ApiRegistry, ApiSignature, load_registry, save_registry
from .semantics import (
    AnnotatedNode,
    MethodContext,
    annotate,
    eval_step,
    initial_attributes,
)

__version__ = "0.1.0"
