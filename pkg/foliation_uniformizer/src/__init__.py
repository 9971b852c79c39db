"""unif3 - exact local uniformization of foliations"""
