#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "footfall/realtime/detector.hpp"
#include "footfall/training.hpp"

namespace footfall {

struct TelemetryFrame {
  std::int64_t timestamp_ms = 0;
  double p_t = 0.0;
  double p_win = 0.0;
  bool fired = false;
  std::optional<bool> truth;  // replay only
};

// ---------------------------------------------------------------------------
// Wire format (JSON text frames)

inline std::string frame_message(const TelemetryFrame& f) {
  nlohmann::json j = {{"type", "telemetry"}, {"t", f.timestamp_ms}, {"p_t", f.p_t},
                      {"p_win", f.p_win},    {"fired", f.fired},    {"truth", nullptr}};
  if (f.truth) j["truth"] = *f.truth;
  return j.dump();
}

inline std::string event_message(const DetectionEvent& e, std::size_t total) {
  return nlohmann::json{{"type", "event"}, {"t", e.timestamp_ms}, {"confidence", e.confidence}, {"total", total}}
      .dump();
}

inline std::string hello_message(const DetectorConfig& cfg, const nlohmann::json& metadata) {
  return nlohmann::json{{"type", "hello"}, {"config", config_to_json(cfg)}, {"metadata", metadata}}.dump();
}

inline std::string ack_message(std::string_view name, double value) {
  return nlohmann::json{{"type", "ack"}, {"name", name}, {"value", value}}.dump();
}

inline std::string err_message(std::string_view reason) {
  return nlohmann::json{{"type", "err"}, {"reason", reason}}.dump();
}

struct SetRequest {
  std::string name;
  double value = 0.0;
};

// Parses {"type":"set","name":...,"value":<number>}. On failure returns
// nullopt and fills `reason`.
inline std::optional<SetRequest> parse_set_message(std::string_view text, std::string& reason) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    reason = "malformed JSON";
    return std::nullopt;
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    reason = "message must be an object with a string 'type'";
    return std::nullopt;
  }
  if (j["type"] != "set") {
    reason = "unsupported message type '" + j["type"].get<std::string>() + "'";
    return std::nullopt;
  }
  if (!j.contains("name") || !j["name"].is_string()) {
    reason = "set: 'name' must be a string";
    return std::nullopt;
  }
  if (!j.contains("value") || !j["value"].is_number()) {
    reason = "set: 'value' must be a number";
    return std::nullopt;
  }
  return SetRequest{j["name"].get<std::string>(), j["value"].get<double>()};
}

// Applies one client message to the detector and returns the reply text.
template <class Detector>
std::string handle_client_message(Detector& detector, std::string_view text) {
  std::string reason;
  const auto req = parse_set_message(text, reason);
  if (!req) return err_message(reason);
  const SetResult r = detector.set_param(req->name, req->value);
  if (!r.ok) return err_message(r.reason);
  return ack_message(req->name, req->value);
}

inline nlohmann::json metadata_summary(const Metadata& m, std::size_t hidden) {
  nlohmann::json j = metadata_to_json(m);
  j["hidden"] = hidden;
  return j;
}

// ---------------------------------------------------------------------------
// Fan-out

// Per-consumer queue. Telemetry frames are bounded and dropped oldest-first;
// event messages and direct replies are never dropped.
class TelemetryConsumer {
 public:
  explicit TelemetryConsumer(std::size_t frame_capacity) : capacity_(frame_capacity) {}

  void push(std::string msg, bool droppable) {
    {
      std::lock_guard lock(mutex_);
      if (droppable) {
        if (capacity_ == 0) {
          ++dropped_;
          return;
        }
        if (frames_ == capacity_) {
          for (auto it = queue_.begin(); it != queue_.end(); ++it)
            if (it->droppable) {
              queue_.erase(it);
              --frames_;
              ++dropped_;
              break;
            }
        }
        ++frames_;
      }
      queue_.push_back({std::move(msg), droppable});
      // Under the lock so set_notify({}) guarantees no call is in flight.
      if (notify_) notify_();
    }
    cv_.notify_all();
  }

  // Moves every queued message into `out` (in order).
  std::size_t drain(std::vector<std::string>& out) {
    std::lock_guard lock(mutex_);
    const std::size_t n = queue_.size();
    for (auto& m : queue_) out.push_back(std::move(m.text));
    queue_.clear();
    frames_ = 0;
    return n;
  }

  std::optional<std::string> wait_pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    if (!cv_.wait_for(lock, timeout, [&] { return !queue_.empty(); })) return std::nullopt;
    Item item = std::move(queue_.front());
    queue_.pop_front();
    if (item.droppable) --frames_;
    return std::move(item.text);
  }

  // Called after every push (under the queue lock, so it must not re-enter);
  // transports use it to wake up.
  void set_notify(std::function<void()> fn) {
    std::lock_guard lock(mutex_);
    notify_ = std::move(fn);
  }

  std::size_t dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
  }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return queue_.size();
  }

 private:
  struct Item {
    std::string text;
    bool droppable;
  };
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Item> queue_;
  std::size_t frames_ = 0;
  std::size_t capacity_;
  std::size_t dropped_ = 0;
  std::function<void()> notify_;
};

class TelemetryHub {
 public:
  explicit TelemetryHub(std::size_t frame_capacity = 256) : capacity_(frame_capacity) {}

  // `greeting`, when given, is queued before any broadcast can reach the
  // new consumer.
  std::shared_ptr<TelemetryConsumer> subscribe(std::optional<std::string> greeting = std::nullopt) {
    auto c = std::make_shared<TelemetryConsumer>(capacity_);
    if (greeting) c->push(std::move(*greeting), false);
    std::lock_guard lock(mutex_);
    consumers_.push_back(c);
    return c;
  }

  void unsubscribe(const std::shared_ptr<TelemetryConsumer>& c) {
    std::lock_guard lock(mutex_);
    std::erase_if(consumers_, [&](const auto& w) {
      auto p = w.lock();
      return !p || p == c;
    });
  }

  void publish_frame(const TelemetryFrame& f) { broadcast(frame_message(f), true); }
  void publish_event(const DetectionEvent& e, std::size_t total) { broadcast(event_message(e, total), false); }

  std::size_t consumer_count() const {
    std::lock_guard lock(mutex_);
    return consumers_.size();
  }

 private:
  void broadcast(const std::string& msg, bool droppable) {
    std::vector<std::shared_ptr<TelemetryConsumer>> live;
    {
      std::lock_guard lock(mutex_);
      std::erase_if(consumers_, [](const auto& w) { return w.expired(); });
      for (auto& w : consumers_)
        if (auto p = w.lock()) live.push_back(std::move(p));
    }
    for (auto& c : live) c->push(msg, droppable);
  }

  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::vector<std::weak_ptr<TelemetryConsumer>> consumers_;
};

}  // namespace footfall
