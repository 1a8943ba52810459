#include "gridfc/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace gridfc {

namespace {

void append_number(std::string& out, double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  out += buf;
}

void append_tensor(std::string& out, const std::string& name,
                   const Eigen::MatrixXd& t) {
  out += "tensor " + name + ' ' + std::to_string(t.rows()) + ' ' +
         std::to_string(t.cols()) + '\n';
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      if (c > 0) out += ' ';
      append_number(out, t(r, c));
    }
    out += '\n';
  }
}

/// Pull-based token reader that tracks position for error messages.
class TokenReader {
public:
  explicit TokenReader(const std::string& text) : stream_(text) {}

  std::string word(const char* what) {
    std::string token;
    if (!(stream_ >> token)) {
      throw CheckpointError(std::string("unexpected end of file, expected ") +
                            what);
    }
    return token;
  }

  void expect(const std::string& literal) {
    const std::string got = word(literal.c_str());
    if (got != literal) {
      throw CheckpointError("expected '" + literal + "', found '" + got + "'");
    }
  }

  long long integer(const char* what) {
    const std::string token = word(what);
    long long value = 0;
    const auto [end, ec] =
        std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || end != token.data() + token.size()) {
      throw CheckpointError(std::string("malformed integer for ") + what +
                            ": '" + token + "'");
    }
    return value;
  }

  double number(const char* what) {
    const std::string token = word(what);
    double value = 0.0;
    const auto [end, ec] =
        std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || end != token.data() + token.size()) {
      throw CheckpointError(std::string("malformed number for ") + what +
                            ": '" + token + "'");
    }
    return value;
  }

  bool at_end() {
    std::string token;
    return !(stream_ >> token);
  }

private:
  std::istringstream stream_;
};

void read_tensor(TokenReader& reader, const std::string& name,
                 Eigen::MatrixXd& t) {
  reader.expect("tensor");
  reader.expect(name);
  const long long rows = reader.integer("tensor rows");
  const long long cols = reader.integer("tensor cols");
  if (rows != t.rows() || cols != t.cols()) {
    throw CheckpointError("tensor " + name + " has shape " +
                          std::to_string(rows) + "x" + std::to_string(cols) +
                          ", expected " + std::to_string(t.rows()) + "x" +
                          std::to_string(t.cols()));
  }
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      t(r, c) = reader.number(name.c_str());
    }
  }
}

}  // namespace

std::string serialize_parameters(const GrnnParameters& params) {
  const GrnnConfig& cfg = params.config;
  cfg.validate();
  std::string out{kCheckpointVersion};
  out += "\nconfig " + std::to_string(cfg.buses) + ' ' +
         std::to_string(cfg.in_features) + ' ' + std::to_string(cfg.hidden) +
         ' ' + std::to_string(cfg.out_features) + ' ' +
         std::to_string(cfg.taps) + ' ' + std::to_string(cfg.actions) + '\n';
  for (int k = 0; k < cfg.taps; ++k) {
    append_tensor(out, "h1." + std::to_string(k),
                  params.h1[static_cast<std::size_t>(k)]);
  }
  for (int k = 0; k < cfg.taps; ++k) {
    append_tensor(out, "h2." + std::to_string(k),
                  params.h2[static_cast<std::size_t>(k)]);
  }
  for (int k = 0; k < cfg.taps; ++k) {
    append_tensor(out, "h3." + std::to_string(k),
                  params.h3[static_cast<std::size_t>(k)]);
  }
  append_tensor(out, "head_w", params.head_w);
  Eigen::MatrixXd bias = params.head_b;
  append_tensor(out, "head_b", bias);
  return out;
}

GrnnParameters deserialize_parameters(const std::string& text) {
  TokenReader reader(text);
  reader.expect("gridfc-params");
  const std::string version = reader.word("format version");
  if (version != "v1") {
    throw CheckpointError("unsupported parameter-file version '" + version +
                          "'");
  }
  reader.expect("config");
  GrnnConfig cfg;
  cfg.buses = static_cast<int>(reader.integer("buses"));
  cfg.in_features = static_cast<int>(reader.integer("in_features"));
  cfg.hidden = static_cast<int>(reader.integer("hidden"));
  cfg.out_features = static_cast<int>(reader.integer("out_features"));
  cfg.taps = static_cast<int>(reader.integer("taps"));
  cfg.actions = static_cast<int>(reader.integer("actions"));
  try {
    cfg.validate();
  } catch (const std::invalid_argument& err) {
    throw CheckpointError(std::string("bad shape header: ") + err.what());
  }

  GrnnParameters params = GrnnParameters::zeros(cfg);
  for (int k = 0; k < cfg.taps; ++k) {
    read_tensor(reader, "h1." + std::to_string(k),
                params.h1[static_cast<std::size_t>(k)]);
  }
  for (int k = 0; k < cfg.taps; ++k) {
    read_tensor(reader, "h2." + std::to_string(k),
                params.h2[static_cast<std::size_t>(k)]);
  }
  for (int k = 0; k < cfg.taps; ++k) {
    read_tensor(reader, "h3." + std::to_string(k),
                params.h3[static_cast<std::size_t>(k)]);
  }
  read_tensor(reader, "head_w", params.head_w);
  Eigen::MatrixXd bias(cfg.actions, 1);
  read_tensor(reader, "head_b", bias);
  params.head_b = bias.col(0);

  if (!reader.at_end()) {
    throw CheckpointError("trailing content after the last tensor");
  }
  return params;
}

void save_parameters(const GrnnParameters& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  const std::string text = serialize_parameters(params);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw CheckpointError("short write to '" + path + "'");
}

GrnnParameters load_parameters(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_parameters(buffer.str());
}

}  // namespace gridfc
