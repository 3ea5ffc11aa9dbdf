// Copyright 2026 The Laso Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "laso/checkpoint.h"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "laso/error.h"

namespace laso {

namespace {

constexpr char kMagic[4] = {'L', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string* out, std::uint32_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_u64(std::string* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_f64(std::string* out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) {
    if (pos + n > buf.size()) {
      throw FormatError("checkpoint file: truncated at byte offset " +
                        std::to_string(pos) + " reading " + what);
    }
  }
  std::uint32_t u16(const char* what) {
    need(2, what);
    std::uint32_t v = static_cast<std::uint8_t>(buf[pos]) |
                      (static_cast<std::uint8_t>(buf[pos + 1]) << 8);
    pos += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + i]))
           << (8 * i);
    }
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos + i]))
           << (8 * i);
    }
    pos += 8;
    return v;
  }
  double f64(const char* what) {
    std::uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

void put_param_table(std::string* out,
                     const std::vector<std::pair<std::string, Tensor>>& table) {
  put_u32(out, static_cast<std::uint32_t>(table.size()));
  for (const auto& [name, value] : table) {
    if (name.size() > 0xffff) {
      throw DataError("save_checkpoint: parameter name longer than 65535 bytes");
    }
    put_u16(out, static_cast<std::uint32_t>(name.size()));
    out->append(name);
    out->push_back(static_cast<char>(value.shape.size()));
    for (int d : value.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : value.data) put_f64(out, v);
  }
}

std::vector<std::pair<std::string, Tensor>> read_param_table(ByteReader* r) {
  std::uint32_t count = r->u32("parameter count");
  std::vector<std::pair<std::string, Tensor>> table;
  table.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = r->u16("parameter name length");
    std::string name = r->bytes(name_len, "parameter name");
    r->need(1, "parameter rank");
    int ndim = static_cast<std::uint8_t>(r->buf[r->pos]);
    r->pos += 1;
    std::vector<int> shape(ndim);
    std::uint64_t n_values = 1;
    for (int d = 0; d < ndim; ++d) {
      std::uint32_t dim = r->u32("parameter dim");
      if (dim > 0x7fffffff) {
        throw FormatError("checkpoint file: dimension out of range at byte offset " +
                          std::to_string(r->pos - 4));
      }
      shape[d] = static_cast<int>(dim);
      n_values *= dim;
    }
    r->need(n_values * 8, "parameter values");
    Tensor value(shape);
    for (std::uint64_t v = 0; v < n_values; ++v) {
      value.data[v] = r->f64("parameter value");
    }
    table.emplace_back(std::move(name), std::move(value));
  }
  return table;
}

}  // namespace

Checkpoint snapshot(const std::vector<Parameter*>& params,
                    const std::string& config_json, std::uint64_t step) {
  Checkpoint ckpt;
  ckpt.config_json = config_json;
  ckpt.step = step;
  ckpt.params.reserve(params.size());
  for (const Parameter* p : params) {
    ckpt.params.emplace_back(p->name, p->value);
  }
  return ckpt;
}

void restore(const Checkpoint& ckpt, const std::vector<Parameter*>& params) {
  std::map<std::string, const Tensor*> stored;
  for (const auto& [name, value] : ckpt.params) {
    if (!stored.emplace(name, &value).second) {
      throw ArchError("restore: duplicate parameter " + name +
                      " in checkpoint");
    }
  }
  if (stored.size() != params.size()) {
    throw ArchError("restore: checkpoint has " + std::to_string(stored.size()) +
                    " parameters, model has " + std::to_string(params.size()));
  }
  for (Parameter* p : params) {
    auto it = stored.find(p->name);
    if (it == stored.end()) {
      throw ArchError("restore: model parameter " + p->name +
                      " missing from checkpoint");
    }
    if (it->second->shape != p->value.shape) {
      throw ArchError("restore: parameter " + p->name + " has shape " +
                      shape_str(it->second->shape) + " in checkpoint, model needs " +
                      shape_str(p->value.shape));
    }
  }
  for (Parameter* p : params) {
    p->value = *stored[p->name];
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(&out, kVersion);
  put_u32(&out, static_cast<std::uint32_t>(ckpt.config_json.size()));
  out.append(ckpt.config_json);
  put_u64(&out, ckpt.step);
  put_param_table(&out, ckpt.params);
  out.push_back(ckpt.has_opt_state ? 1 : 0);
  if (ckpt.has_opt_state) {
    put_u64(&out, ckpt.opt_step);
    put_param_table(&out, ckpt.opt_m);
    put_param_table(&out, ckpt.opt_v);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("save_checkpoint: cannot open " + path);
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) {
    throw IoError("save_checkpoint: write failed for " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("load_checkpoint: cannot open " + path);
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  std::string buf = ss.str();

  ByteReader r{buf};
  if (r.bytes(4, "magic") != std::string(kMagic, 4)) {
    throw FormatError("checkpoint file: bad magic at byte offset 0");
  }
  std::uint32_t version = r.u32("format version");
  if (version != kVersion) {
    throw FormatError("checkpoint file: unsupported format version " +
                      std::to_string(version) + " at byte offset 4");
  }
  Checkpoint ckpt;
  std::uint32_t cfg_len = r.u32("config length");
  ckpt.config_json = r.bytes(cfg_len, "config json");
  ckpt.step = r.u64("training step");
  ckpt.params = read_param_table(&r);
  r.need(1, "optimizer-state flag");
  ckpt.has_opt_state = static_cast<std::uint8_t>(buf[r.pos]) != 0;
  r.pos += 1;
  if (ckpt.has_opt_state) {
    ckpt.opt_step = r.u64("optimizer step");
    ckpt.opt_m = read_param_table(&r);
    ckpt.opt_v = read_param_table(&r);
  }
  if (r.pos != buf.size()) {
    throw FormatError("checkpoint file: " + std::to_string(buf.size() - r.pos) +
                      " trailing bytes at byte offset " + std::to_string(r.pos));
  }
  return ckpt;
}

Checkpoint average_checkpoints(const std::vector<std::string>& paths) {
  if (paths.empty()) {
    throw ConfigError("average_checkpoints: no checkpoint paths given");
  }
  Checkpoint avg = load_checkpoint(paths[0]);
  avg.has_opt_state = false;
  avg.opt_m.clear();
  avg.opt_v.clear();
  for (std::size_t i = 1; i < paths.size(); ++i) {
    Checkpoint next = load_checkpoint(paths[i]);
    if (next.params.size() != avg.params.size()) {
      throw ArchError("average_checkpoints: " + paths[i] + " has " +
                      std::to_string(next.params.size()) +
                      " parameters, expected " +
                      std::to_string(avg.params.size()));
    }
    for (std::size_t p = 0; p < avg.params.size(); ++p) {
      if (next.params[p].first != avg.params[p].first) {
        throw ArchError("average_checkpoints: parameter order mismatch at " +
                        next.params[p].first + " in " + paths[i]);
      }
      if (next.params[p].second.shape != avg.params[p].second.shape) {
        throw ArchError("average_checkpoints: shape mismatch for " +
                        next.params[p].first + " in " + paths[i]);
      }
      for (std::size_t v = 0; v < avg.params[p].second.data.size(); ++v) {
        avg.params[p].second.data[v] += next.params[p].second.data[v];
      }
    }
    avg.step = next.step;
  }
  double inv = 1.0 / static_cast<double>(paths.size());
  for (auto& [name, value] : avg.params) {
    for (double& v : value.data) v *= inv;
  }
  return avg;
}

}  // namespace laso
