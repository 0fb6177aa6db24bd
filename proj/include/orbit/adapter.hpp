#pragma once

#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>

#include "orbit/model.hpp"

namespace orbit::model {

// Raised on adapter transport failures: process spawn/exit, timeout,
// malformed or out-of-order responses.
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AdapterConfig {
    std::string command;  // launched via /bin/sh -c
    int height = 64;
    int width = 64;
    int num_classes = 6;
    int timeout_ms = 10000;
};

// Model backed by an external process speaking newline-delimited JSON on its
// stdin/stdout. One request is in flight at a time; responses must echo the
// request id, so an out-of-order reply is a protocol error.
class AdapterModel : public Model {
  public:
    explicit AdapterModel(AdapterConfig config);
    ~AdapterModel() override;

    AdapterModel(const AdapterModel&) = delete;
    AdapterModel& operator=(const AdapterModel&) = delete;

    int height() const override { return config_.height; }
    int width() const override { return config_.width; }
    int num_classes() const override { return config_.num_classes; }

    Prediction predict(const Image& image) const override;
    Prediction predict_with_dropout(const Image& image, uint64_t pass_seed) const override;
    ActivationVector activations(const Image& image) const override;

  private:
    std::string round_trip(const std::string& op, const Image& image, bool with_seed,
                           uint64_t seed) const;
    Prediction parse_labels(const std::string& line, uint64_t id) const;

    AdapterConfig config_;
    mutable std::mutex io_mutex_;
    mutable uint64_t next_id_ = 1;
    mutable int expected_activation_dim_ = -1;
    int child_pid_ = -1;
    int to_child_ = -1;    // write end of child's stdin
    int from_child_ = -1;  // read end of child's stdout
    mutable std::string read_buffer_;
};

}  // namespace orbit::model
