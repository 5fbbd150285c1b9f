#pragma once

#include <stdexcept>
#include <string>

namespace fdk {

// Every failure the library reports, one code per condition named in the
// module contracts. Tests match on the code, messages are for humans.
enum class Err {
  // tensor ops
  ChannelMismatch,
  EmptyOutput,
  NonFiniteResult,
  NonFiniteInput,
  ShapeMismatch,
  DimensionMismatch,
  InvalidRate,
  // model graph
  ParseError,
  CycleDetected,
  UnknownNode,
  ShapeInferenceError,
  MissingWeight,
  // data pipeline
  DecoderNotFound,
  DecoderFailed,
  ZeroFrames,
  UnsupportedFormat,
  CorruptHeader,
  TruncatedPayload,
  ZeroStd,
  NoClasses,
  EmptyClassDir,
  ClassTooSmall,
  IoError,
  // head trainer
  DecodeError,
  FingerprintMismatch,
  LabelOutOfRange,
  EmptyBatch,
  MissingEmbedding,
  NonFiniteLoss,
  // eval
  EmptySplit,
  // config / arguments
  InvalidConfig,
  InvalidArgument,
};

const char* err_name(Err code);

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& msg)
      : std::runtime_error(std::string(err_name(code)) + ": " + msg), code_(code) {}

  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool ok, Err code, const std::string& msg) {
  if (!ok) fail(code, msg);
}

}  // namespace fdk
