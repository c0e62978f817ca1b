from .audio import AudioBuffer, Skipped, cut_segment, read_wav, resample_8k_to_16k, write_wav
from .manifest import ManifestEntry, ManifestSummary, build_manifest, load_manifest
from .synth import ChannelProfile, StreamRecord, atc_channel, base_channel, load_streams, synth_corpus
from .transcripts import ParseError, TransmissionRecord, parse_transcript, serialize_record

__all__ = [
    "AudioBuffer", "Skipped", "cut_segment", "read_wav", "resample_8k_to_16k",
    "write_wav", "ManifestEntry", "ManifestSummary", "build_manifest",
    "load_manifest", "ChannelProfile", "StreamRecord", "atc_channel",
    "base_channel", "load_streams", "synth_corpus", "ParseError",
    "TransmissionRecord", "parse_transcript", "serialize_record",
]
