#include "lexnorm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "lexnorm/dataset.hpp"
#include "lexnorm/errors.hpp"

namespace lexnorm {

namespace {

constexpr char kMagic[8] = {'L', 'X', 'N', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("checkpoint is truncated");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

void store_params(Checkpoint& ck, const std::string& prefix, const std::vector<Matrix>& params,
                  const std::vector<ParamInfo>& info, const Adam& adam, bool with_optimizer) {
  for (std::size_t i = 0; i < params.size(); ++i) ck.add(prefix + "/" + info[i].name, params[i]);
  if (!with_optimizer) return;
  ck.meta[prefix]["adam_steps"] = adam.steps();
  for (std::size_t i = 0; i < adam.first_moment().size(); ++i) {
    ck.add(prefix + "/adam_m/" + info[i].name, adam.first_moment()[i]);
    ck.add(prefix + "/adam_v/" + info[i].name, adam.second_moment()[i]);
  }
}

void restore_params(const Checkpoint& ck, const std::string& prefix, std::vector<Matrix>& params,
                    const std::vector<ParamInfo>& info, Adam& adam) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& stored = ck.get(prefix + "/" + info[i].name);
    if (stored.rows() != params[i].rows() || stored.cols() != params[i].cols()) {
      throw DataError("checkpoint array " + info[i].name + " has the wrong shape");
    }
    params[i] = stored;
  }
  adam.reset(params);
  if (ck.meta.contains(prefix) && ck.meta.at(prefix).contains("adam_steps")) {
    adam.set_steps(ck.meta.at(prefix).at("adam_steps").get<long>());
    for (std::size_t i = 0; i < params.size(); ++i) {
      adam.first_moment()[i] = ck.get(prefix + "/adam_m/" + info[i].name);
      adam.second_moment()[i] = ck.get(prefix + "/adam_v/" + info[i].name);
    }
  }
}

}  // namespace

void Checkpoint::add(const std::string& name, const Matrix& value) {
  for (auto& [n, m] : arrays_) {
    if (n == name) {
      m = value;
      return;
    }
  }
  arrays_.emplace_back(name, value);
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& a : arrays_)
    if (a.first == name) return true;
  return false;
}

const Matrix& Checkpoint::get(const std::string& name) const {
  for (const auto& a : arrays_)
    if (a.first == name) return a.second;
  throw DataError("checkpoint has no array '" + name + "'");
}

std::string Checkpoint::serialize() const {
  nlohmann::json header = {{"meta", meta}, {"arrays", nlohmann::json::array()}};
  for (const auto& [name, m] : arrays_) header["arrays"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  const std::string h = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, h.size());
  out += h;
  for (const auto& a : arrays_) {
    const Matrix& m = a.second;
    out.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  return out;
}

Checkpoint Checkpoint::parse(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a lexnorm checkpoint");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto hlen = take<std::uint64_t>(bytes, pos);
  if (pos + hlen > bytes.size()) throw DataError("checkpoint header is truncated");
  Checkpoint ck;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  }
  pos += hlen;
  ck.meta = header.at("meta");
  for (const auto& a : header.at("arrays")) {
    Matrix m(a.at("rows").get<Eigen::Index>(), a.at("cols").get<Eigen::Index>());
    const std::size_t n = static_cast<std::size_t>(m.size()) * sizeof(double);
    if (pos + n > bytes.size()) throw DataError("checkpoint data is truncated");
    std::memcpy(m.data(), bytes.data() + pos, n);
    pos += n;
    ck.arrays_.emplace_back(a.at("name").get<std::string>(), std::move(m));
  }
  if (pos != bytes.size()) throw DataError("checkpoint has trailing bytes");
  return ck;
}

void Checkpoint::save(const std::string& path) const { write_file_atomic(path, serialize()); }

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void store_student(Checkpoint& ck, const StudentModel& model, const std::string& prefix, bool with_optimizer) {
  ck.meta[prefix]["config"] = model.config().to_json();
  ck.meta[prefix]["vocab_size"] = model.vocab_size();
  store_params(ck, prefix, model.params(), model.param_info(), model.optimizer(), with_optimizer);
}

StudentModel restore_student(const Checkpoint& ck, const std::string& prefix) {
  if (!ck.meta.contains(prefix)) throw DataError("checkpoint holds no '" + prefix + "' model");
  const auto& m = ck.meta.at(prefix);
  Rng scratch(0);
  StudentModel model(StudentConfig::from_json(m.at("config")), m.at("vocab_size").get<std::size_t>(), scratch);
  restore_params(ck, prefix, model.params(), model.param_info(), model.optimizer());
  return model;
}

void store_ran(Checkpoint& ck, const RanModel& model, const std::string& prefix, bool with_optimizer) {
  ck.meta[prefix]["config"] = model.config().to_json();
  ck.meta[prefix]["input_dim"] = model.input_dim();
  store_params(ck, prefix, model.params(), model.param_info(), model.optimizer(), with_optimizer);
}

RanModel restore_ran(const Checkpoint& ck, const std::string& prefix) {
  if (!ck.meta.contains(prefix)) throw DataError("checkpoint holds no '" + prefix + "' model");
  const auto& m = ck.meta.at(prefix);
  Rng scratch(0);
  RanModel model(RanConfig::from_json(m.at("config")), m.at("input_dim").get<int>(), scratch);
  restore_params(ck, prefix, model.params(), model.param_info(), model.optimizer());
  return model;
}

}  // namespace lexnorm
