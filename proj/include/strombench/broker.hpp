#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "strombench/event.hpp"

namespace strombench {

struct ConsumedRecord {
    std::int64_t offset = 0;
    std::int64_t ingest_ts_ms = 0;
    std::int64_t event_ts_ms = 0;
    EncodedRecord record;
};

struct ProduceResult {
    int partition = 0;
    std::int64_t offset = 0;
    std::int64_t ingest_ts_ms = 0;
    std::int64_t blocked_us = 0; // time spent waiting on a full partition
};

class TopicExistsError : public std::runtime_error {
public:
    explicit TopicExistsError(const std::string& name)
        : std::runtime_error("topic \"" + name + "\" already exists") {}
};

class UnknownTopicError : public std::runtime_error {
public:
    explicit UnknownTopicError(const std::string& name)
        : std::runtime_error("unknown topic \"" + name + "\"") {}
};

class TopicClosedError : public std::runtime_error {
public:
    explicit TopicClosedError(const std::string& name)
        : std::runtime_error("topic \"" + name + "\" is closed") {}
};

class UnknownPartitionError : public std::runtime_error {
public:
    UnknownPartitionError(const std::string& topic, int partition)
        : std::runtime_error("topic \"" + topic + "\" has no partition " +
                             std::to_string(partition)) {}
};

class UnknownGroupError : public std::runtime_error {
public:
    explicit UnknownGroupError(const std::string& group)
        : std::runtime_error("consumer group \"" + group + "\" is not registered") {}
};

class OffsetRegressionError : public std::runtime_error {
public:
    OffsetRegressionError(std::int64_t offset, std::int64_t committed)
        : std::runtime_error("commit of offset " + std::to_string(offset) +
                             " regresses behind committed offset " +
                             std::to_string(committed)) {}
};

class OffsetBeyondHeadError : public std::runtime_error {
public:
    OffsetBeyondHeadError(std::int64_t offset, std::int64_t head)
        : std::runtime_error("commit of offset " + std::to_string(offset) +
                             " is beyond the head (" + std::to_string(head) + ")") {}
};

class PartitionOwnedError : public std::runtime_error {
public:
    PartitionOwnedError(const std::string& group, int partition)
        : std::runtime_error("partition " + std::to_string(partition) +
                             " is already owned within group \"" + group + "\"") {}
};

class PartitionNotOwnedError : public std::runtime_error {
public:
    PartitionNotOwnedError(const std::string& group, int partition)
        : std::runtime_error("partition " + std::to_string(partition) +
                             " is not owned within group \"" + group + "\"") {}
};

/// The broker contract generators and engines are written against. An
/// external broker (e.g. a wire-protocol client) can be dropped in by
/// implementing this interface for one topic.
class TopicAdapter {
public:
    virtual ~TopicAdapter() = default;

    /// Appends a record. Keyed records route by stable hash so one key always
    /// lands in one partition; unkeyed records round-robin. Blocks while the
    /// target partition is full; throws TopicClosedError once closed.
    virtual ProduceResult produce(std::optional<std::int64_t> key, EncodedRecord record,
                                  std::int64_t event_ts_ms) = 0;

    /// Returns up to max_batch records after the group's read position, in
    /// offset order. An empty batch means the group is caught up.
    virtual std::vector<ConsumedRecord> consume(const std::string& group, int partition,
                                                std::size_t max_batch) = 0;

    /// Marks `offset` as processed. Monotone: regressions are rejected, and
    /// offsets past the head are rejected.
    virtual void commit(const std::string& group, int partition, std::int64_t offset) = 0;

    /// head - committed, per partition. All zeros iff fully caught up.
    virtual std::vector<std::int64_t> lag(const std::string& group) const = 0;

    virtual void register_group(const std::string& group) = 0;
    virtual int partition_count() const = 0;
};

class Topic;

/// Exclusive consumption right for one (group, partition); released on
/// destruction. At most one claim per (group, partition) exists at a time.
class PartitionClaim {
public:
    PartitionClaim() = default;
    PartitionClaim(Topic* topic, std::string group, int partition);
    PartitionClaim(PartitionClaim&& other) noexcept;
    PartitionClaim& operator=(PartitionClaim&& other) noexcept;
    PartitionClaim(const PartitionClaim&) = delete;
    PartitionClaim& operator=(const PartitionClaim&) = delete;
    ~PartitionClaim();

    void release();
    int partition() const { return partition_; }

private:
    Topic* topic_ = nullptr;
    std::string group_;
    int partition_ = -1;
};

/// In-process partitioned, bounded, append-only log. Safe for concurrent
/// producers and consumers; appends are serialized per partition; consumer
/// groups hold independent offsets.
class Topic final : public TopicAdapter {
public:
    Topic(std::string name, int partitions, std::int64_t partition_capacity);

    const std::string& name() const { return name_; }
    int partition_count() const override { return static_cast<int>(partitions_.size()); }

    ProduceResult produce(std::optional<std::int64_t> key, EncodedRecord record,
                          std::int64_t event_ts_ms) override;
    std::vector<ConsumedRecord> consume(const std::string& group, int partition,
                                        std::size_t max_batch) override;
    void commit(const std::string& group, int partition, std::int64_t offset) override;
    std::vector<std::int64_t> lag(const std::string& group) const override;
    void register_group(const std::string& group) override;

    /// Exclusive consumption right; throws PartitionOwnedError when taken.
    PartitionClaim acquire_partition(const std::string& group, int partition);

    /// Unblocks producers with TopicClosedError; consumers may still drain.
    void close();

    std::int64_t head_offset(int partition) const;
    std::int64_t total_records() const; // produced since creation, all partitions

private:
    friend class PartitionClaim;

    struct StoredRecord {
        std::int64_t ingest_ts_ms;
        std::int64_t event_ts_ms;
        EncodedRecord record;
    };

    struct GroupCursor {
        std::int64_t position = 0;   // next offset consume() will deliver
        std::int64_t committed = -1; // last processed offset
        bool owned = false;
    };

    struct Partition {
        mutable std::mutex mutex;
        std::condition_variable space;
        std::deque<StoredRecord> buffer;
        std::int64_t base_offset = 0; // offset of buffer.front()
        std::int64_t next_offset = 0;
        std::int64_t last_ingest_ms = 0;
        std::map<std::string, GroupCursor> cursors;
        bool closed = false;
    };

    Partition& partition_at(int index);
    const Partition& partition_at(int index) const;
    // Drops the prefix every registered group has read past. Caller holds p.mutex.
    static void evict_consumed(Partition& p);
    void release_claim(const std::string& group, int partition);

    std::string name_;
    std::int64_t capacity_;
    std::vector<std::unique_ptr<Partition>> partitions_;
    std::atomic<std::uint64_t> round_robin_{0};
};

/// Registry of named topics.
class Broker {
public:
    Topic& create_topic(const std::string& name, int partitions,
                        std::int64_t partition_capacity);
    Topic& topic(const std::string& name);
    bool has_topic(const std::string& name) const;
    void close_all();

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::unique_ptr<Topic>> topics_;
};

} // namespace strombench
