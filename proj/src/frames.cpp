#include "fdk/frames.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <sys/wait.h>

#include "fdk/error.hpp"

namespace fs = std::filesystem;

namespace fdk {

namespace {

std::string substitute(std::string tmpl, const std::string& key, const std::string& value) {
  std::size_t pos = tmpl.find(key);
  require(pos != std::string::npos, Err::InvalidArgument,
          "decoder command template must contain " + key);
  while (pos != std::string::npos) {
    tmpl.replace(pos, key.size(), value);
    pos = tmpl.find(key, pos + value.size());
  }
  return tmpl;
}

bool is_frame_file(const std::string& name, const std::string& ext) {
  // frame_ + 6 digits + .ext
  const std::string prefix = "frame_";
  const std::string suffix = "." + ext;
  if (name.size() != prefix.size() + 6 + suffix.size()) return false;
  if (name.compare(0, prefix.size(), prefix) != 0) return false;
  if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) return false;
  for (std::size_t i = prefix.size(); i < prefix.size() + 6; ++i)
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return false;
  return true;
}

}  // namespace

std::size_t extract_frames(const std::string& video_path, const std::string& out_dir,
                           const std::string& decoder_command_template,
                           const std::string& frame_ext) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec, Err::IoError, "cannot create " + out_dir);

  std::string pattern = (fs::path(out_dir) / ("frame_%06d." + frame_ext)).string();
  std::string cmd = substitute(decoder_command_template, "{input}", video_path);
  cmd = substitute(cmd, "{output_pattern}", pattern);

  std::string output;
  {
    std::string shell_cmd = cmd + " 2>&1";
    FILE* pipe = popen(shell_cmd.c_str(), "r");
    require(pipe != nullptr, Err::DecoderFailed, "cannot launch decoder: " + cmd);
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) output.append(buf.data(), n);
    int status = pclose(pipe);
    int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (exit_code == 127)
      fail(Err::DecoderNotFound, "decoder binary not found; attempted: " + cmd);
    if (exit_code != 0)
      fail(Err::DecoderFailed, "decoder exited with status " + std::to_string(exit_code) +
                                   "; attempted: " + cmd + "; output: " + output);
  }

  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(out_dir))
    if (entry.is_regular_file() && is_frame_file(entry.path().filename().string(), frame_ext))
      ++count;
  require(count > 0, Err::ZeroFrames, "decoder produced no frame files in " + out_dir);
  return count;
}

}  // namespace fdk
