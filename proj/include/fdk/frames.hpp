#pragma once

#include <cstddef>
#include <string>

namespace fdk {

// Runs an external decoder (ffmpeg or compatible) to split a video into
// frame files named frame_%06d.<ext> under out_dir, and returns how many
// frame files the decoder produced. The command template must contain
// {input} and {output_pattern} placeholders, e.g.
//   ffmpeg -v error -i {input} {output_pattern}
// A shell "command not found" (exit 127) reports DecoderNotFound; any other
// nonzero exit reports DecoderFailed with the captured output.
std::size_t extract_frames(const std::string& video_path, const std::string& out_dir,
                           const std::string& decoder_command_template,
                           const std::string& frame_ext = "ppm");

}  // namespace fdk
