class Stack:
    def __init__(self):
        """Create an empty stack."""
        self.items = []
        self.size = 0

    def push(self, item):
        """Push an item on top of the stack."""
        self.items.append(item)
        self.size += 1
        return self.size

    def pop(self):
        """Remove and return the item on top of the stack."""
        if not self.items:
            raise IndexError("pop from empty stack")
        self.size -= 1
        return self.items.pop()

    def peek(self):
        """Return the item on top of the stack without removing it."""
        if not self.items:
            return None
        top = self.items[-1]
        return top


class Account:
    def __init__(self, owner, balance=0):
        """Create an account for the owner with a starting balance."""
        self.owner = owner
        self.balance = balance
        self.history = []

    def deposit(self, amount):
        """Add a positive amount to the balance."""
        if amount <= 0:
            raise ValueError("amount must be positive")
        self.balance += amount
        self.history.append(amount)
        return self.balance

    def withdraw(self, amount):
        """Take an amount from the balance if the funds allow it."""
        if amount > self.balance:
            raise ValueError("insufficient funds")
        self.balance -= amount
        self.history.append(-amount)
        return self.balance


class Counter:
    def __init__(self):
        """Create a counter with no entries."""
        self.counts = {}
        self.total = 0

    def add(self, key):
        """Count one more occurrence of the key."""
        if key not in self.counts:
            self.counts[key] = 0
        self.counts[key] += 1
        self.total += 1

    def most_common(self):
        """Return the key that was counted most often."""
        best = None
        best_count = 0
        for key, count in self.counts.items():
            if count > best_count:
                best = key
                best_count = count
        return best


class Queue:
    def __init__(self, capacity):
        """Create a bounded queue with the given capacity."""
        self.capacity = capacity
        self.items = []
        self.dropped = 0

    def enqueue(self, item):
        """Add an item at the back of the queue unless it is full."""
        if len(self.items) >= self.capacity:
            self.dropped += 1
            return False
        self.items.append(item)
        return True

    def dequeue(self):
        """Remove and return the item at the front of the queue."""
        if not self.items:
            return None
        item = self.items[0]
        self.items = self.items[1:]
        return item


def load_config(path):
    """Load a key value configuration file into a dictionary."""
    config = {}
    with open(path) as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, value = line.split("=", 1)
            config[key.strip()] = value.strip()
    return config


def validate_email(address):
    """Check that the address looks like a valid email."""
    if "@" not in address:
        return False
    name, domain = address.split("@", 1)
    if not name or "." not in domain:
        return False
    return True


def normalize(values):
    """Scale the values so that they sum to one."""
    total = sum(values)
    if total == 0:
        return [0.0 for _ in values]
    result = []
    for v in values:
        result.append(v / total)
    return result


def count_lines(path):
    """Count the lines of the file at path."""
    count = 0
    with open(path) as handle:
        for _ in handle:
            count += 1
    return count


def invert_dict(mapping):
    """Return a dictionary that maps each value back to its key."""
    inverted = {}
    for key, value in mapping.items():
        if value in inverted:
            raise KeyError(value)
        inverted[value] = key
    return inverted


def group_by_length(words):
    """Group the words by their length."""
    groups = {}
    for word in words:
        size = len(word)
        if size not in groups:
            groups[size] = []
        groups[size].append(word)
    return groups


def to_snake_case(name):
    """Convert a camel case name into snake case."""
    result = []
    for i, char in enumerate(name):
        if char.isupper() and i > 0:
            result.append("_")
        result.append(char.lower())
    return "".join(result)


def power_set(items):
    """Return every subset of the items as a list of lists."""
    subsets = [[]]
    for item in items:
        new_subsets = []
        for subset in subsets:
            new_subsets.append(subset + [item])
        subsets.extend(new_subsets)
    return subsets


def rotate(items, k):
    """Rotate the list to the right by k positions."""
    if not items:
        return items
    k = k % len(items)
    rotated = items[-k:] + items[:-k]
    return rotated


def pairwise_sums(items):
    """Return the sums of each adjacent pair of items."""
    sums = []
    for i in range(len(items) - 1):
        sums.append(items[i] + items[i + 1])
    return sums


def second_largest(values):
    """Return the second largest distinct value of the list."""
    distinct = sorted(set(values))
    if len(distinct) < 2:
        return None
    result = distinct[-2]
    return result


def matrix_sum(matrix):
    """Return the sum of every entry of the matrix."""
    total = 0
    for row in matrix:
        for value in row:
            total += value
    return total


def digits_sum(n):
    """Return the sum of the decimal digits of n."""
    n = abs(n)
    total = 0
    while n > 0:
        total += n % 10
        n //= 10
    return total


def remove_none(items):
    """Return the items that are not None."""
    result = []
    for item in items:
        if item is not None:
            result.append(item)
    return result


def average_length(words):
    """Return the average length of the words."""
    if not words:
        return 0.0
    lengths = [len(w) for w in words]
    total = sum(lengths)
    return total / len(words)


def starts_with_vowel(word):
    """Check whether the word starts with a vowel."""
    if not word:
        return False
    first = word[0].lower()
    return first in "aeiou"


def zip_to_dict(keys, values):
    """Build a dictionary from parallel lists of keys and values."""
    if len(keys) != len(values):
        raise ValueError("length mismatch")
    result = {}
    for key, value in zip(keys, values):
        result[key] = value
    return result


def last_index(items, target):
    """Return the last index of target in the list or minus one."""
    index = -1
    for i, item in enumerate(items):
        if item == target:
            index = i
    return index


def repeat_string(text, times):
    """Repeat the text the given number of times."""
    if times < 0:
        raise ValueError("times must be non negative")
    parts = []
    for _ in range(times):
        parts.append(text)
    return "".join(parts)
