#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "usersim/core/ids.hpp"

namespace usersim {

struct Item {
    ItemId id;
    std::string title;
    std::string description;
    std::set<std::string> categories;

    bool operator==(const Item&) const = default;
};

/// Immutable after construction. Iteration and index() order is ascending id.
class ItemCatalog {
public:
    ItemCatalog() = default;
    /// Validates and normalizes; throws SimError on duplicate ids or empty categories.
    explicit ItemCatalog(std::vector<Item> items);

    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }
    const std::vector<Item>& items() const noexcept { return items_; }
    const Item& at(std::size_t index) const { return items_.at(index); }
    const Item* find(const ItemId& id) const;
    std::optional<std::size_t> index_of(const ItemId& id) const;
    /// Case-insensitive, whitespace-normalized exact title match.
    const Item* find_by_title(std::string_view title) const;

    const std::set<std::string>& category_universe() const noexcept { return categories_; }

    bool operator==(const ItemCatalog& other) const { return items_ == other.items_; }

private:
    std::vector<Item> items_;
    std::set<std::string> categories_;
    std::unordered_map<ItemId, std::size_t> by_id_;
    std::unordered_map<std::string, std::size_t> by_title_;
};

/// Parses CSV with header `id,title,description,categories`; categories are '|'-separated.
ItemCatalog load_catalog_csv(std::string_view csv_content);
ItemCatalog load_catalog_file(const std::string& path);
std::string catalog_to_csv(const ItemCatalog& catalog);

}  // namespace usersim
