#include "orbit/adapter.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>

#include <json.hpp>

namespace orbit::model {

using nlohmann::json;

AdapterModel::AdapterModel(AdapterConfig config) : config_(std::move(config)) {
    if (config_.command.empty()) throw TransportError("adapter command is empty");
    int to_pipe[2];
    int from_pipe[2];
    if (pipe(to_pipe) != 0) throw TransportError("adapter: pipe() failed");
    if (pipe(from_pipe) != 0) {
        close(to_pipe[0]);
        close(to_pipe[1]);
        throw TransportError("adapter: pipe() failed");
    }
    const int pid = fork();
    if (pid < 0) {
        for (int fd : {to_pipe[0], to_pipe[1], from_pipe[0], from_pipe[1]}) close(fd);
        throw TransportError("adapter: fork() failed");
    }
    if (pid == 0) {
        // Own process group so teardown can kill the shell and its children.
        setpgid(0, 0);
        dup2(to_pipe[0], STDIN_FILENO);
        dup2(from_pipe[1], STDOUT_FILENO);
        for (int fd : {to_pipe[0], to_pipe[1], from_pipe[0], from_pipe[1]}) close(fd);
        execl("/bin/sh", "sh", "-c", config_.command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    child_pid_ = pid;
    to_child_ = to_pipe[1];
    from_child_ = from_pipe[0];
    close(to_pipe[0]);
    close(from_pipe[1]);
    // Ignore SIGPIPE per-write by checking the write() result instead.
    signal(SIGPIPE, SIG_IGN);
}

AdapterModel::~AdapterModel() {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    if (child_pid_ > 0) {
        // Give the child a moment to exit on stdin EOF, then force the whole
        // process group (the shell may have spawned grandchildren).
        bool reaped = false;
        for (int i = 0; i < 50 && !reaped; ++i) {
            reaped = waitpid(child_pid_, nullptr, WNOHANG) != 0;
            if (!reaped) usleep(10000);
        }
        kill(-child_pid_, SIGKILL);
        if (!reaped) {
            kill(child_pid_, SIGKILL);
            waitpid(child_pid_, nullptr, 0);
        }
    }
}

namespace {

int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

std::string AdapterModel::round_trip(const std::string& op, const Image& image, bool with_seed,
                                     uint64_t seed) const {
    if (image.h != config_.height || image.w != config_.width) {
        throw std::invalid_argument("adapter: image dimensions do not match model");
    }
    const uint64_t id = next_id_++;
    json req;
    req["id"] = id;
    req["op"] = op;
    if (with_seed) {
        req["seed"] = seed;
    } else {
        req["seed"] = nullptr;
    }
    req["h"] = image.h;
    req["w"] = image.w;
    req["pixels"] = image.data;
    std::string line = req.dump();
    line.push_back('\n');

    size_t written = 0;
    while (written < line.size()) {
        const ssize_t n = write(to_child_, line.data() + written, line.size() - written);
        if (n <= 0) throw TransportError("adapter: write to child failed (process gone?)");
        written += static_cast<size_t>(n);
    }

    const int64_t deadline = now_ms() + config_.timeout_ms;
    for (;;) {
        const size_t nl = read_buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string out = read_buffer_.substr(0, nl);
            read_buffer_.erase(0, nl + 1);
            return out;
        }
        const int64_t remaining = deadline - now_ms();
        if (remaining <= 0) throw TransportError("adapter: response timed out");
        struct pollfd pfd{from_child_, POLLIN, 0};
        const int pr = poll(&pfd, 1, static_cast<int>(remaining));
        if (pr < 0) throw TransportError("adapter: poll failed");
        if (pr == 0) throw TransportError("adapter: response timed out");
        char chunk[65536];
        const ssize_t n = read(from_child_, chunk, sizeof(chunk));
        if (n <= 0) throw TransportError("adapter: child closed stdout");
        read_buffer_.append(chunk, static_cast<size_t>(n));
    }
}

Prediction AdapterModel::parse_labels(const std::string& line, uint64_t id) const {
    json resp = json::parse(line, nullptr, false);
    if (resp.is_discarded() || !resp.is_object() || !resp.contains("id")) {
        throw TransportError("adapter: malformed response");
    }
    if (resp["id"].get<uint64_t>() != id) {
        throw TransportError("adapter: out-of-order response id");
    }
    if (resp.contains("error")) {
        throw TransportError("adapter: remote error: " + resp["error"].get<std::string>());
    }
    if (!resp.contains("labels") || !resp["labels"].is_array()) {
        throw TransportError("adapter: response missing labels");
    }
    const auto& labels = resp["labels"];
    const size_t expected = static_cast<size_t>(config_.height) * config_.width;
    if (labels.size() != expected) {
        throw TransportError("adapter: labels length mismatch");
    }
    Prediction pred;
    pred.labels = Mask(config_.height, config_.width);
    pred.num_classes = config_.num_classes;
    for (size_t i = 0; i < expected; ++i) {
        const int v = labels[i].get<int>();
        if (v < 0 || v >= config_.num_classes) {
            throw TransportError("adapter: label out of range");
        }
        pred.labels.data[i] = static_cast<uint8_t>(v);
    }
    return pred;
}

Prediction AdapterModel::predict(const Image& image) const {
    std::lock_guard<std::mutex> lock(io_mutex_);
    const uint64_t id = next_id_;
    return parse_labels(round_trip("predict", image, false, 0), id);
}

Prediction AdapterModel::predict_with_dropout(const Image& image, uint64_t pass_seed) const {
    std::lock_guard<std::mutex> lock(io_mutex_);
    const uint64_t id = next_id_;
    return parse_labels(round_trip("predict_dropout", image, true, pass_seed), id);
}

ActivationVector AdapterModel::activations(const Image& image) const {
    std::lock_guard<std::mutex> lock(io_mutex_);
    const uint64_t id = next_id_;
    const std::string line = round_trip("activations", image, false, 0);
    json resp = json::parse(line, nullptr, false);
    if (resp.is_discarded() || !resp.is_object() || !resp.contains("id")) {
        throw TransportError("adapter: malformed response");
    }
    if (resp["id"].get<uint64_t>() != id) {
        throw TransportError("adapter: out-of-order response id");
    }
    if (resp.contains("error")) {
        throw TransportError("adapter: remote error: " + resp["error"].get<std::string>());
    }
    if (!resp.contains("values") || !resp["values"].is_array()) {
        throw TransportError("adapter: response missing values");
    }
    ActivationVector out = resp["values"].get<std::vector<double>>();
    if (out.empty()) throw TransportError("adapter: empty activation vector");
    if (expected_activation_dim_ < 0) {
        expected_activation_dim_ = static_cast<int>(out.size());
    } else if (static_cast<int>(out.size()) != expected_activation_dim_) {
        throw TransportError("adapter: activation dimension changed between calls");
    }
    return out;
}

}  // namespace orbit::model
