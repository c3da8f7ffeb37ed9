#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "footfall/data_io.hpp"
#include "footfall/error.hpp"

namespace footfall {

struct RecorderConfig {
  double queue_capacity_seconds = 5.0;
  std::int64_t flush_interval_ms = 1000;
  std::size_t flush_batch = 1000;
  std::size_t writer_buffer_bytes = 65536;
  double sample_rate_hz = 200.0;

  std::size_t queue_capacity_items() const {
    return static_cast<std::size_t>(std::ceil(queue_capacity_seconds * sample_rate_hz));
  }

  void validate() const {
    if (!(queue_capacity_seconds > 0) || flush_interval_ms <= 0 || flush_batch == 0 || writer_buffer_bytes == 0 ||
        !(sample_rate_hz > 0))
      throw ValidationError("RecorderConfig: all fields must be positive");
  }
};

// Destination for CSV text. `write` may buffer; `flush` pushes to storage.
// Both throw std::runtime_error on failure.
class SessionSink {
 public:
  virtual ~SessionSink() = default;
  virtual void write(std::string_view text) = 0;
  virtual void flush() = 0;
  virtual std::string name() const = 0;
};

class BufferedFileSink final : public SessionSink {
 public:
  BufferedFileSink(std::filesystem::path path, std::size_t buffer_bytes)
      : path_(std::move(path)), capacity_(buffer_bytes) {
    file_ = std::fopen(path_.string().c_str(), "wb");
    if (!file_) throw std::runtime_error("cannot open " + path_.string());
    buffer_.reserve(capacity_);
  }
  ~BufferedFileSink() override {
    try {
      flush();
    } catch (...) {
    }
    if (file_) std::fclose(file_);
  }
  BufferedFileSink(const BufferedFileSink&) = delete;
  BufferedFileSink& operator=(const BufferedFileSink&) = delete;

  void write(std::string_view text) override {
    if (buffer_.size() + text.size() > capacity_) drain();
    if (text.size() > capacity_) {
      put(text);
      return;
    }
    buffer_.append(text);
  }

  void flush() override {
    drain();
    if (file_ && std::fflush(file_) != 0) throw std::runtime_error("flush failed: " + path_.string());
  }

  std::string name() const override { return path_.string(); }

 private:
  void drain() {
    if (buffer_.empty()) return;
    put(buffer_);
    buffer_.clear();
  }
  void put(std::string_view text) {
    if (std::fwrite(text.data(), 1, text.size(), file_) != text.size())
      throw std::runtime_error("write failed: " + path_.string());
  }

  std::filesystem::path path_;
  std::size_t capacity_;
  std::string buffer_;
  std::FILE* file_ = nullptr;
};

inline std::string session_filename(std::int64_t unix_ms) {
  return "session_" + std::to_string(unix_ms) + ".csv";
}

struct RecorderStats {
  std::size_t dropped_samples = 0;
  std::size_t written_samples = 0;
  std::size_t written_events = 0;
  std::size_t flushes = 0;
  std::size_t rotations = 0;
  std::string last_error;
};

// Non-blocking session logger. One producer pushes samples and annotations;
// a drainer (tick(), or the optional background thread) writes them out.
//
// Samples go through a fixed-capacity ring that overwrites the oldest entry
// when full. Annotations use a separate unbounded lane and are never dropped.
class SessionRecorder {
 public:
  using SinkFactory = std::function<std::unique_ptr<SessionSink>(std::int64_t unix_ms)>;

  SessionRecorder(RecorderConfig cfg, SinkFactory factory) : cfg_(cfg), factory_(std::move(factory)) {
    cfg_.validate();
    ring_.resize(cfg_.queue_capacity_items());
  }

  // Sessions are written as <dir>/session_<unix_ms>.csv.
  static SinkFactory directory_sink(std::filesystem::path dir, std::size_t buffer_bytes) {
    return [dir = std::move(dir), buffer_bytes](std::int64_t ms) -> std::unique_ptr<SessionSink> {
      return std::make_unique<BufferedFileSink>(dir / session_filename(ms), buffer_bytes);
    };
  }

  SessionRecorder(const SessionRecorder&) = delete;
  SessionRecorder& operator=(const SessionRecorder&) = delete;

  ~SessionRecorder() { stop(); }

  void start(std::int64_t now_ms) {
    std::lock_guard lock(io_mutex_);
    open_sink(now_ms);
    last_flush_ms_ = now_ms;
    last_rotation_ms_ = now_ms;
    running_.store(true);
  }

  // Drains whatever is queued, then closes the sink.
  void stop() {
    if (!running_.exchange(false)) return;
    stop_background();
    std::lock_guard lock(io_mutex_);
    drain_locked(last_flush_ms_);
    if (sink_) {
      try {
        sink_->flush();
      } catch (const std::exception& e) {
        stats_.last_error = e.what();
      }
    }
    sink_.reset();
  }

  bool running() const { return running_.load(); }

  bool push(const RawSample& s) {
    if (!running_.load()) return false;
    std::lock_guard lock(queue_mutex_);
    if (count_ == ring_.size()) {
      head_ = (head_ + 1) % ring_.size();
      --count_;
      ++dropped_;
    }
    ring_[(head_ + count_) % ring_.size()] = s;
    ++count_;
    return true;
  }

  bool push(const AnnotationEvent& e) {
    if (!running_.load()) return false;
    std::lock_guard lock(queue_mutex_);
    events_.push_back(e);
    return true;
  }

  // Flushes when flush_batch samples are queued or flush_interval_ms has
  // elapsed since the previous flush. Returns whether a flush happened.
  bool tick(std::int64_t now_ms) {
    if (!running_.load()) throw StateError("recorder not started");
    std::lock_guard lock(io_mutex_);
    std::size_t queued = 0;
    {
      std::lock_guard q(queue_mutex_);
      queued = count_;
    }
    if (queued < cfg_.flush_batch && now_ms - last_flush_ms_ < cfg_.flush_interval_ms) return false;
    drain_locked(now_ms);
    last_flush_ms_ = now_ms;
    return true;
  }

  // Runs tick() from a background thread against the wall clock.
  void start_background(std::chrono::milliseconds poll = std::chrono::milliseconds(10)) {
    if (worker_.joinable()) return;
    stop_worker_ = false;
    worker_ = std::thread([this, poll] {
      std::unique_lock lk(worker_mutex_);
      while (!stop_worker_) {
        worker_cv_.wait_for(lk, poll, [this] { return stop_worker_; });
        if (stop_worker_) break;
        lk.unlock();
        try {
          tick(wall_clock_ms());
        } catch (const std::exception&) {
        }
        lk.lock();
      }
    });
  }

  std::size_t queued_samples() const {
    std::lock_guard lock(queue_mutex_);
    return count_;
  }

  RecorderStats stats() const {
    std::lock_guard lock(io_mutex_);
    RecorderStats s = stats_;
    std::lock_guard q(queue_mutex_);
    s.dropped_samples = dropped_;
    return s;
  }

  std::string current_sink_name() const {
    std::lock_guard lock(io_mutex_);
    return sink_ ? sink_->name() : std::string{};
  }

  static std::int64_t wall_clock_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
  }

 private:
  void stop_background() {
    {
      std::lock_guard lk(worker_mutex_);
      stop_worker_ = true;
    }
    worker_cv_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  void open_sink(std::int64_t now_ms) {
    sink_ = factory_(now_ms);
    sink_->write(std::string(kSessionHeader) + "\n");
  }

  void drain_locked(std::int64_t now_ms) {
    std::vector<RawSample> samples;
    std::vector<AnnotationEvent> events;
    {
      std::lock_guard q(queue_mutex_);
      samples.reserve(count_);
      for (std::size_t i = 0; i < count_; ++i) samples.push_back(ring_[(head_ + i) % ring_.size()]);
      head_ = 0;
      count_ = 0;
      events.swap(events_);
    }
    if (samples.empty() && events.empty()) return;

    std::stable_sort(samples.begin(), samples.end(),
                     [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; });
    std::stable_sort(events.begin(), events.end(),
                     [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; });
    std::string text;
    text.reserve(48 * (samples.size() + events.size()));
    std::size_t e = 0;
    for (const auto& s : samples) {
      while (e < events.size() && events[e].timestamp_ms < s.timestamp_ms) append_event_row(text, events[e++]);
      append_sample_row(text, s);
    }
    while (e < events.size()) append_event_row(text, events[e++]);

    try {
      write_out(text);
    } catch (const std::exception& ex) {
      // Rotate to a fresh file and retry the batch once.
      stats_.last_error = ex.what();
      ++stats_.rotations;
      std::int64_t stamp = std::max(now_ms, last_rotation_ms_ + 1);
      last_rotation_ms_ = stamp;
      open_sink(stamp);
      write_out(text);
    }
    stats_.written_samples += samples.size();
    stats_.written_events += events.size();
    ++stats_.flushes;
  }

  void write_out(const std::string& text) {
    sink_->write(text);
    sink_->flush();
  }

  RecorderConfig cfg_;
  SinkFactory factory_;

  mutable std::mutex queue_mutex_;
  std::vector<RawSample> ring_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  std::size_t dropped_ = 0;
  std::vector<AnnotationEvent> events_;

  mutable std::mutex io_mutex_;
  std::unique_ptr<SessionSink> sink_;
  std::int64_t last_flush_ms_ = 0;
  std::int64_t last_rotation_ms_ = 0;
  RecorderStats stats_;

  std::atomic<bool> running_{false};
  std::thread worker_;
  std::mutex worker_mutex_;
  std::condition_variable worker_cv_;
  bool stop_worker_ = false;
};

}  // namespace footfall
