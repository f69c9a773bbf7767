"""Document-level multi-event extraction over token-event-role matrices."""
from .corpus import Document, EventRecord, ParsedToken, filter_stopwords, ingest_parsed, load_stoplist
from .evaldecode import MetricsReport, decode_events, score_records, score_tags
from .ontology import EventOntology, default_ontology, load_ontology, number_roles
from .pipeline import Checkpoint, TrainConfig, predict, train
from .synthetic import SynthConfig, generate_synthetic
from .terstruct import TerMatrix, build_gold_matrices, complexity_cells, plan_duplicates

__version__ = "0.1.0"
