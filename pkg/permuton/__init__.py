"""Limit shapes of restricted Mallows permutations"""
