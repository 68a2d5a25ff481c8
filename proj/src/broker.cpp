#include "strombench/broker.hpp"

#include <algorithm>
#include <chrono>

#include "strombench/clock.hpp"
#include "strombench/config.hpp"

namespace strombench {

PartitionClaim::PartitionClaim(Topic* topic, std::string group, int partition)
    : topic_(topic), group_(std::move(group)), partition_(partition) {}

PartitionClaim::PartitionClaim(PartitionClaim&& other) noexcept
    : topic_(other.topic_), group_(std::move(other.group_)), partition_(other.partition_) {
    other.topic_ = nullptr;
    other.partition_ = -1;
}

PartitionClaim& PartitionClaim::operator=(PartitionClaim&& other) noexcept {
    if (this != &other) {
        release();
        topic_ = other.topic_;
        group_ = std::move(other.group_);
        partition_ = other.partition_;
        other.topic_ = nullptr;
        other.partition_ = -1;
    }
    return *this;
}

PartitionClaim::~PartitionClaim() { release(); }

void PartitionClaim::release() {
    if (topic_) {
        topic_->release_claim(group_, partition_);
        topic_ = nullptr;
        partition_ = -1;
    }
}

Topic::Topic(std::string name, int partitions, std::int64_t partition_capacity)
    : name_(std::move(name)), capacity_(partition_capacity) {
    if (partitions < 1) {
        throw std::invalid_argument("partition count must be >= 1");
    }
    if (partition_capacity < 1) {
        throw std::invalid_argument("partition capacity must be >= 1");
    }
    partitions_.reserve(static_cast<std::size_t>(partitions));
    for (int i = 0; i < partitions; ++i) {
        partitions_.push_back(std::make_unique<Partition>());
    }
}

Topic::Partition& Topic::partition_at(int index) {
    if (index < 0 || index >= partition_count()) {
        throw UnknownPartitionError(name_, index);
    }
    return *partitions_[static_cast<std::size_t>(index)];
}

const Topic::Partition& Topic::partition_at(int index) const {
    if (index < 0 || index >= partition_count()) {
        throw UnknownPartitionError(name_, index);
    }
    return *partitions_[static_cast<std::size_t>(index)];
}

void Topic::evict_consumed(Partition& p) {
    if (p.cursors.empty()) return;
    std::int64_t min_position = p.next_offset;
    for (const auto& [group, cursor] : p.cursors) {
        min_position = std::min(min_position, cursor.position);
    }
    while (!p.buffer.empty() && p.base_offset < min_position) {
        p.buffer.pop_front();
        ++p.base_offset;
    }
}

ProduceResult Topic::produce(std::optional<std::int64_t> key, EncodedRecord record,
                             std::int64_t event_ts_ms) {
    int target;
    if (key.has_value()) {
        target = static_cast<int>(fnv1a64(std::to_string(*key)) %
                                  static_cast<std::uint64_t>(partition_count()));
    } else {
        target = static_cast<int>(round_robin_.fetch_add(1, std::memory_order_relaxed) %
                                  static_cast<std::uint64_t>(partition_count()));
    }

    Partition& p = partition_at(target);
    std::unique_lock lock(p.mutex);
    std::int64_t blocked_us = 0;
    if (p.closed) throw TopicClosedError(name_);
    evict_consumed(p);
    if (static_cast<std::int64_t>(p.buffer.size()) >= capacity_) {
        const auto wait_start = std::chrono::steady_clock::now();
        p.space.wait(lock, [&] {
            if (p.closed) return true;
            evict_consumed(p);
            return static_cast<std::int64_t>(p.buffer.size()) < capacity_;
        });
        blocked_us = std::chrono::duration_cast<std::chrono::microseconds>(
                         std::chrono::steady_clock::now() - wait_start)
                         .count();
        if (p.closed) throw TopicClosedError(name_);
    }

    ProduceResult result;
    result.partition = target;
    result.offset = p.next_offset++;
    result.ingest_ts_ms = std::max(Clock::now_ms(), p.last_ingest_ms);
    result.blocked_us = blocked_us;
    p.last_ingest_ms = result.ingest_ts_ms;
    p.buffer.push_back({result.ingest_ts_ms, event_ts_ms, std::move(record)});
    return result;
}

std::vector<ConsumedRecord> Topic::consume(const std::string& group, int partition,
                                           std::size_t max_batch) {
    Partition& p = partition_at(partition);
    std::unique_lock lock(p.mutex);
    auto it = p.cursors.find(group);
    if (it == p.cursors.end()) throw UnknownGroupError(group);
    GroupCursor& cursor = it->second;
    if (!cursor.owned) throw PartitionNotOwnedError(group, partition);

    const std::int64_t from = std::max(cursor.position, p.base_offset);
    const std::int64_t available = p.next_offset - from;
    const std::int64_t n =
        std::min<std::int64_t>(available, static_cast<std::int64_t>(max_batch));
    std::vector<ConsumedRecord> batch;
    if (n <= 0) return batch;
    batch.reserve(static_cast<std::size_t>(n));
    for (std::int64_t off = from; off < from + n; ++off) {
        const StoredRecord& rec = p.buffer[static_cast<std::size_t>(off - p.base_offset)];
        batch.push_back({off, rec.ingest_ts_ms, rec.event_ts_ms, rec.record});
    }
    cursor.position = from + n;
    lock.unlock();
    p.space.notify_all();
    return batch;
}

void Topic::commit(const std::string& group, int partition, std::int64_t offset) {
    Partition& p = partition_at(partition);
    std::lock_guard lock(p.mutex);
    auto it = p.cursors.find(group);
    if (it == p.cursors.end()) throw UnknownGroupError(group);
    GroupCursor& cursor = it->second;
    if (offset < cursor.committed) throw OffsetRegressionError(offset, cursor.committed);
    if (offset >= p.next_offset) throw OffsetBeyondHeadError(offset, p.next_offset);
    cursor.committed = offset;
}

std::vector<std::int64_t> Topic::lag(const std::string& group) const {
    std::vector<std::int64_t> result;
    result.reserve(partitions_.size());
    for (const auto& part : partitions_) {
        std::lock_guard lock(part->mutex);
        auto it = part->cursors.find(group);
        if (it == part->cursors.end()) throw UnknownGroupError(group);
        result.push_back(part->next_offset - (it->second.committed + 1));
    }
    return result;
}

void Topic::register_group(const std::string& group) {
    for (auto& part : partitions_) {
        std::lock_guard lock(part->mutex);
        auto [it, inserted] = part->cursors.try_emplace(group);
        if (inserted) {
            it->second.position = part->base_offset;
            it->second.committed = part->base_offset - 1;
        }
    }
}

PartitionClaim Topic::acquire_partition(const std::string& group, int partition) {
    Partition& p = partition_at(partition);
    std::lock_guard lock(p.mutex);
    auto it = p.cursors.find(group);
    if (it == p.cursors.end()) throw UnknownGroupError(group);
    if (it->second.owned) throw PartitionOwnedError(group, partition);
    it->second.owned = true;
    return PartitionClaim(this, group, partition);
}

void Topic::release_claim(const std::string& group, int partition) {
    Partition& p = partition_at(partition);
    std::lock_guard lock(p.mutex);
    auto it = p.cursors.find(group);
    if (it != p.cursors.end()) it->second.owned = false;
}

void Topic::close() {
    for (auto& part : partitions_) {
        {
            std::lock_guard lock(part->mutex);
            part->closed = true;
        }
        part->space.notify_all();
    }
}

std::int64_t Topic::head_offset(int partition) const {
    const Partition& p = partition_at(partition);
    std::lock_guard lock(p.mutex);
    return p.next_offset;
}

std::int64_t Topic::total_records() const {
    std::int64_t total = 0;
    for (const auto& part : partitions_) {
        std::lock_guard lock(part->mutex);
        total += part->next_offset;
    }
    return total;
}

Topic& Broker::create_topic(const std::string& name, int partitions,
                            std::int64_t partition_capacity) {
    std::lock_guard lock(mutex_);
    if (topics_.count(name)) throw TopicExistsError(name);
    auto topic = std::make_unique<Topic>(name, partitions, partition_capacity);
    Topic& ref = *topic;
    topics_.emplace(name, std::move(topic));
    return ref;
}

Topic& Broker::topic(const std::string& name) {
    std::lock_guard lock(mutex_);
    auto it = topics_.find(name);
    if (it == topics_.end()) throw UnknownTopicError(name);
    return *it->second;
}

bool Broker::has_topic(const std::string& name) const {
    std::lock_guard lock(mutex_);
    return topics_.count(name) > 0;
}

void Broker::close_all() {
    std::lock_guard lock(mutex_);
    for (auto& [name, topic] : topics_) {
        topic->close();
    }
}

} // namespace strombench
