#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fraudlens {

enum class Errc {
  // corpus
  MalformedLine,
  MissingField,
  UnknownLabel,
  DuplicateId,
  EmptyInput,
  DegenerateSplit,
  // textproc
  EmptyCorpus,
  // classifiers
  SingleClassInput,
  NonFiniteLoss,
  UnsupportedVersion,
  CorruptModel,
  KindMismatch,
  // llm_backend
  EmptyComment,
  UnmappableReply,
  RemoteUnavailable,
  RateLimited,
  MalformedResponse,
  // metrics
  LengthMismatch,
  EmptyMatrix,
  InvalidMatrix,
  TooFewRaters,
  // annotation
  UnknownRater,
  UnknownItem,
  DuplicateRating,
  NoFullyRatedItems,
  // general
  InvalidArgument,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (HTTP handlers, the CLI) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace fraudlens
