"""tweetcast: Bitcoin tweet-corpus mining and next-day price prediction."""

__version__ = "0.1.0"
