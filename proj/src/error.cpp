#include "fraudlens/error.hpp"

namespace fraudlens {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::MissingField: return "MissingField";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::DegenerateSplit: return "DegenerateSplit";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::SingleClassInput: return "SingleClassInput";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::CorruptModel: return "CorruptModel";
    case Errc::KindMismatch: return "KindMismatch";
    case Errc::EmptyComment: return "EmptyComment";
    case Errc::UnmappableReply: return "UnmappableReply";
    case Errc::RemoteUnavailable: return "RemoteUnavailable";
    case Errc::RateLimited: return "RateLimited";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::InvalidMatrix: return "InvalidMatrix";
    case Errc::TooFewRaters: return "TooFewRaters";
    case Errc::UnknownRater: return "UnknownRater";
    case Errc::UnknownItem: return "UnknownItem";
    case Errc::DuplicateRating: return "DuplicateRating";
    case Errc::NoFullyRatedItems: return "NoFullyRatedItems";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace fraudlens
