#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lexnorm/optim.hpp"
#include "lexnorm/ran_teacher.hpp"
#include "lexnorm/student.hpp"

namespace lexnorm {

// Versioned binary container: magic, format version, a JSON header with
// metadata and array shapes, then raw column-major doubles.
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  nlohmann::json meta = nlohmann::json::object();

  void add(const std::string& name, const Matrix& value);
  bool has(const std::string& name) const;
  const Matrix& get(const std::string& name) const;
  const std::vector<std::pair<std::string, Matrix>>& arrays() const { return arrays_; }

  std::string serialize() const;
  static Checkpoint parse(const std::string& bytes);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::vector<std::pair<std::string, Matrix>> arrays_;
};

// Stores parameters (and optionally Adam moments) under `prefix`.
void store_student(Checkpoint& ck, const StudentModel& model, const std::string& prefix = "student",
                   bool with_optimizer = true);
StudentModel restore_student(const Checkpoint& ck, const std::string& prefix = "student");

void store_ran(Checkpoint& ck, const RanModel& model, const std::string& prefix = "ran", bool with_optimizer = true);
RanModel restore_ran(const Checkpoint& ck, const std::string& prefix = "ran");

}  // namespace lexnorm
